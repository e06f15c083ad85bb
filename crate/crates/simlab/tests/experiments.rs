use jointshrink_simlab::{run_experiment, ExperimentSpec, Family, MethodTag, Scenario};

fn small(p: usize, trials: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec::standard(Scenario::UnequalSpherical, Family::Gaussian, 3, p, trials, seed).unwrap()
}

#[test]
fn same_seed_same_report() {
    let methods = ["Oracle1", "LDA", "Prop1(G,KL)"].map(|m| m.parse::<MethodTag>().unwrap());
    let a = run_experiment(&small(4, 3, 5), &methods).unwrap();
    let b = run_experiment(&small(4, 3, 5), &methods).unwrap();
    let c = run_experiment(&small(4, 3, 6), &methods).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.rows, c.rows);
}

#[test]
fn oracle_beats_estimated_rules() {
    let methods = ["Oracle1", "Oracle2", "QDA", "LDA"].map(|m| m.parse::<MethodTag>().unwrap());
    let report = run_experiment(&small(5, 20, 21), &methods).unwrap();
    let mean = |i: usize| report.rows[i].mean.unwrap();
    assert!(mean(0) <= mean(1));
    assert!(mean(0) <= mean(2));
    assert!(mean(0) <= mean(3));
}

#[test]
fn qda_is_absent_when_a_class_is_too_small() {
    let methods = [MethodTag::Qda, MethodTag::Lda];
    let report = run_experiment(&small(30, 2, 3), &methods).unwrap();
    assert!(report.rows[0].mean.is_none());
    assert!(report.rows[0].absent.is_some());
    assert!(report.rows[1].mean.is_some());
}
