use liso::distributions::{IsotropicGaussian, SeededRng};
use liso::objectives::{external_objective, sphere, ExternalCommand, ObjectiveError};
use liso::{run_adaptive_liso, run_liso, AdaptiveConfig, Objective, StaticConfig};

// stubs must answer each line as it arrives; mawk buffers its input, so the
// sphere stub is perl and the rest are shell loops
const SPHERE_STUB: &str = r#"$| = 1; my $s = 0; $s += $_ * $_ for split; printf "%.17g\n", $s;"#;

fn sphere_stub(d: usize) -> Objective {
    external_objective(ExternalCommand::new("perl", ["-ne", SPHERE_STUB]), d).unwrap()
}

fn shell(script: &str, d: usize) -> Objective {
    external_objective(ExternalCommand::new("sh", ["-c", script]), d).unwrap()
}

#[test]
fn sphere_stub_matches_in_process_sphere() {
    let objective = sphere_stub(4);
    let g = IsotropicGaussian::new(vec![0.0; 4], 4.0);
    let mut rng = SeededRng::new(5, 0);
    let mut x = vec![0.0; 4];
    for _ in 0..100 {
        g.sample_into(&mut rng, &mut x);
        let got = objective.evaluate(&x).unwrap();
        let want = sphere(&x).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{got} vs {want}");
    }
    assert_eq!(objective.evaluations(), 100);
}

#[test]
fn constant_stub() {
    let objective = shell("while read -r _; do echo 0.0; done", 3);
    for x in [[0.0, 1.0, 2.0], [-5.0, 1e-300, 7.25]] {
        assert_eq!(objective.evaluate(&x).unwrap(), 0.0);
    }
}

#[test]
fn nan_reply_is_an_error() {
    let objective = shell("while read -r _; do echo nan; done", 2);
    match objective.evaluate(&[1.0, 2.0]) {
        Err(ObjectiveError::External { raw, .. }) => assert_eq!(raw.trim(), "nan"),
        other => panic!("expected an external error, got {other:?}"),
    }
}

#[test]
fn garbage_reply_and_dead_child_are_errors() {
    let objective = shell("while read -r _; do echo hello; done", 1);
    assert!(matches!(
        objective.evaluate(&[1.0]),
        Err(ObjectiveError::External { .. })
    ));
    let objective = shell("read -r _; exit 3", 1);
    assert!(matches!(
        objective.evaluate(&[1.0]),
        Err(ObjectiveError::External { .. })
    ));
    assert!(external_objective(ExternalCommand::new("/nonexistent/liso-stub", Vec::<String>::new()), 1).is_err());
}

#[test]
fn drivers_run_against_a_child_process() {
    let q0 = IsotropicGaussian::new(vec![0.5; 2], 0.5);
    let local = run_liso(&Objective::sphere(2), &StaticConfig::new(500, 1.0, q0.clone(), 9)).unwrap();
    let remote_objective = sphere_stub(2).with_minimizer(vec![0.0; 2]);
    let remote = run_liso(&remote_objective, &StaticConfig::new(500, 1.0, q0.clone(), 9)).unwrap();
    assert_eq!(remote_objective.evaluations(), 500);
    for (a, b) in local.estimate.iter().zip(&remote.estimate) {
        assert!((a - b).abs() < 1e-9);
    }

    let remote_objective = sphere_stub(2);
    let out = run_adaptive_liso(&remote_objective, &AdaptiveConfig::new(900, 1.0, q0, 9)).unwrap();
    assert_eq!(remote_objective.evaluations(), 900);
    assert!(out.trace.squared_errors.is_empty());
}
