use fixseg::fixpoint::{self, FixpointConfig};
use fixseg::harness::{self, report, EvalConfig, PhantomSpec, RowSpec, Scale, TrainConfig};
use fixseg::metrics;
use fixseg::model::{classifier_predict, Backend, ClassifierParams};
use fixseg::volume::{self, Axis};
use fixseg::MarginSpec;

#[test]
fn classifier_fitted_on_phantoms_segments_held_out_slices() {
    let spec = PhantomSpec {
        target_fraction: 0.03,
        noise_sigma: 0.2,
        ..PhantomSpec::new([32, 32, 32], 21)
    };
    let cases = harness::phantom_cases(&spec, 3).unwrap();
    let config = TrainConfig {
        min_pixels: 20,
        margin_hi: 6,
        classifier: ClassifierParams {
            epochs: 60,
            ..Default::default()
        },
        ..Default::default()
    };
    let train: Vec<&harness::Case> = cases[..2].iter().collect();
    let samples =
        harness::training_samples(&train, Scale::Coarse, Axis::Axial, &config, 0).unwrap();
    let out = fixseg::model::classifier_train(&samples, &config.classifier).unwrap();

    let held_out = &cases[2];
    let mut scores = Vec::new();
    for i in 0..32 {
        let truth = volume::slice(held_out.truth.as_ref(), Axis::Axial, i).unwrap();
        if truth.foreground_count() < 20 {
            continue;
        }
        let img = volume::slice(&held_out.volume, Axis::Axial, i).unwrap();
        let pred = classifier_predict(&img, &out.params).unwrap().binarize();
        scores.push(metrics::dsc(&pred.data, &truth.data).unwrap());
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    assert!(!scores.is_empty());
    assert!(mean >= 0.7, "held-out slice DSC {mean}");
}

#[test]
fn report_aggregates_recompute_from_the_case_csv() {
    let cases = harness::phantom_cases(&PhantomSpec::new([32, 32, 32], 4), 8).unwrap();
    let trained = harness::train_models(
        &cases,
        &TrainConfig {
            backend: Backend::Oracle,
            oracle_noise: 0.2,
            ..Default::default()
        },
    )
    .unwrap();
    let config = EvalConfig {
        rows: RowSpec::parse_list("coarse,iter1,iter3,thresh0.95,best,oracle-box").unwrap(),
        fixpoint: FixpointConfig {
            margins: MarginSpec::fixed(4),
            ..Default::default()
        },
    };
    let evaluated = harness::evaluate(&cases, &trained, &config).unwrap();
    assert_eq!(evaluated.rows.len(), 6 * 8);

    let text = report::to_case_csv(&evaluated).unwrap();
    let parsed = report::from_case_csv(&text).unwrap();
    assert_eq!(parsed, evaluated);

    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    for summary in evaluated.summaries() {
        let values: Vec<f64> = records
            .iter()
            .filter(|r| &r[0] == summary.method.as_str())
            .map(|r| r[2].parse::<f64>().unwrap())
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let stats = summary.dsc.unwrap();
        assert_eq!(stats.n, 8);
        assert!((stats.mean - mean).abs() < 1e-12);
        assert!((stats.std - var.sqrt()).abs() < 1e-12);
        assert_eq!(stats.max, values.iter().cloned().fold(f64::MIN, f64::max));
        assert_eq!(stats.min, values.iter().cloned().fold(f64::MAX, f64::min));
        assert!(stats.min <= stats.mean && stats.mean <= stats.max);
    }

    let threshold = evaluated.summary("After d_t > 0.95").unwrap();
    assert!(threshold.iterations.unwrap().max <= 10.0);
    let md = report::to_markdown(&evaluated);
    assert_eq!(md.lines().filter(|l| l.starts_with("| ")).count(), 7);
}

#[test]
fn evaluation_uses_held_out_fold_models() {
    let cases = harness::phantom_cases(&PhantomSpec::new([16, 16, 16], 2), 4).unwrap();
    let trained = harness::train_models(
        &cases,
        &TrainConfig {
            backend: Backend::Oracle,
            oracle_noise: 0.0,
            oracle_jitter: 0,
            ..Default::default()
        },
    )
    .unwrap();
    for case in &cases {
        let fold = trained.plan.fold_of(&case.id).unwrap();
        assert!(!trained.plan.train_ids(fold).contains(&case.id));
        let set = trained.for_case(&case.id).unwrap();
        let coarse = set.views(Scale::Coarse, Some(&case.truth)).unwrap();
        let fine = set.views(Scale::Fine, Some(&case.truth)).unwrap();
        let (z, trace) =
            fixpoint::run_fixpoint(&case.volume, &coarse, &fine, &FixpointConfig::default())
                .unwrap();
        assert_eq!(&z, case.truth.as_ref());
        assert_eq!(trace.iteration_count(), 1);
    }
}
