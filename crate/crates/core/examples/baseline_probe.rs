// temporary probe: relaxation distances for the case-1 setup
use decolab::asymptotics::relaxation_distance;
use decolab::charfn::CharFn;
use decolab::noise::NoiseSpec;
use decolab::propagator::evolve;
use nalgebra::DMatrix;

fn main() {
    let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
    let phi0 = CharFn::ground_state(1);
    for t in [10.0, 20.0, 40.0] {
        let phi_t = evolve(&phi0, &noise, t).unwrap();
        let d = relaxation_distance(&phi_t, &noise, t).unwrap();
        println!("t = {t}: relative distance = {d:.10e}");
    }
}
