//! End-to-end library flow: group file -> orbits -> decomposition ->
//! block coefficients -> reduced program -> real embedding -> SDPA text.

use symsdp_core::decomposer::{coefficients, decompose, DecomposeConfig};
use symsdp_core::sdpa::SdpaFile;
use symsdp_core::sdpreduce::{export_sdpa, lift_solution, realify, reduce};
use symsdp_core::{CMatrix, Complex, GroupAction, InvariantSdp, PairOrbits};

fn full_flow(group_json: &str, sdp_json: &str) -> (PairOrbits, InvariantSdp, SdpaFile, f64) {
    let action = GroupAction::from_json(group_json).unwrap();
    let orbits = PairOrbits::compute(&action).unwrap();
    let decomposition = decompose(&action, &orbits, &DecomposeConfig::default()).unwrap();
    let image = coefficients(&decomposition, &orbits).unwrap();
    let sdp = InvariantSdp::from_json(sdp_json).unwrap();
    let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
    let real = realify(&reduced).unwrap();
    let file = export_sdpa(&real);

    // Export -> parse round-trips to the identical data.
    let parsed = SdpaFile::parse(&file.render()).unwrap();
    assert_eq!(parsed, file);

    // Objective factors through the orbit basis on random coefficient
    // vectors.
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut y = vec![Complex::new(0.0, 0.0); orbits.count()];
        for r in 0..orbits.count() {
            let rt = orbits.transpose_of(r);
            if r <= rt {
                let value = Complex::new(((seed + 1) as f64 * (r + 1) as f64).sin(), 0.0);
                y[r] = value;
                y[rt] = value;
            }
        }
        let full = orbits.assemble(&y).unwrap();
        let direct = (sdp.objective() * &full).trace().re;
        let through: Complex = reduced
            .objective_coefficients()
            .iter()
            .zip(&y)
            .map(|(c, v)| c * v)
            .sum();
        worst = worst.max((direct - through.re).abs().max(through.im.abs()));
    }
    (orbits, sdp, file, worst)
}

#[test]
fn seven_cycle_walk_program() {
    let group = r#"{ "domain_size": 7, "generators": [[1,2,3,4,5,6,0],[0,6,5,4,3,2,1]] }"#;
    // Maximize the adjacency mass of a unit-trace invariant matrix.
    let sdp = r#"{
        "domain_size": 7,
        "objective": [[0,1,1,0],[1,2,1,0],[2,3,1,0],[3,4,1,0],[4,5,1,0],[5,6,1,0],[6,0,1,0]],
        "constraints": [
            { "entries": [[0,0,1,0],[1,1,1,0],[2,2,1,0],[3,3,1,0],[4,4,1,0],[5,5,1,0],[6,6,1,0]], "rhs": 1.0 }
        ]
    }"#;
    let (orbits, _, file, objective_gap) = full_flow(group, sdp);
    assert_eq!(orbits.count(), 4);
    assert_eq!(file.block_sizes, vec![1, 1, 1, 1]);
    assert!(objective_gap < 1e-8);
}

#[test]
fn hamming_three_diagonal_program() {
    let group = r#"{ "domain_size": 8, "generators": [[0,2,1,3,4,6,5,7],[0,2,4,6,1,3,5,7]] }"#;
    let sdp = r#"{
        "domain_size": 8,
        "objective": [[0,0,1,0],[1,1,1,0],[2,2,1,0],[3,3,1,0],[4,4,1,0],[5,5,1,0],[6,6,1,0],[7,7,1,0]],
        "constraints": []
    }"#;
    let (orbits, sdp_data, file, objective_gap) = full_flow(group, sdp);
    assert_eq!(orbits.count(), 20);
    let mut sizes = file.block_sizes.clone();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![2, 4]);
    assert!(objective_gap < 1e-8);

    // Lifting the identity's orbit coefficients reproduces a PSD matrix
    // with unit diagonal.
    let action = GroupAction::from_json(group).unwrap();
    let orbits = PairOrbits::compute(&action).unwrap();
    let decomposition = decompose(&action, &orbits, &DecomposeConfig::default()).unwrap();
    let image = coefficients(&decomposition, &orbits).unwrap();
    let reduced = reduce(&sdp_data, &orbits, &image, 1e-8).unwrap();
    let mut y = vec![Complex::new(0.0, 0.0); orbits.count()];
    for (r, value) in y.iter_mut().enumerate() {
        let (x, yc) = orbits.representative(r);
        if x == yc {
            *value = Complex::new(1.0, 0.0);
        }
    }
    let (full, report) = lift_solution(&y, &orbits, &sdp_data, &reduced).unwrap();
    assert_eq!(full, CMatrix::identity(8, 8));
    assert!(report.psd);
    assert!((report.objective_full - 8.0).abs() < 1e-12);
}
