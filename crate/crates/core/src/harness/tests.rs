use std::io::Write as _;
use std::sync::Arc;

use super::*;
use crate::bnet::NetworkStructure;
use crate::cond::{CondConfig, ConditionalModel, ConditionalSpec, Mode};
use crate::data::{Dataset, Schema, VarKind, Variable};
use crate::error::Error;
use crate::leaf::LeafFamily;
use crate::rng::rng_for;
use crate::testutil::{quad, quad2};

fn labelled_schema() -> Schema {
    Schema::new(vec![
        Variable::continuous("x", 0.0, 1.0),
        Variable {
            name: "colour".into(),
            kind: VarKind::Discrete {
                arity: 3,
                values: vec!["red".into(), "green".into(), "blue".into()],
            },
        },
        Variable::discrete("flag", 2),
    ])
    .unwrap()
}

fn csv_file(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn reads_three_rows_with_labels() {
    let f = csv_file("x,colour,flag\n0.5,red,0\n0.25,blue,1\n1,green,1\n");
    let d = read_csv(f.path(), Arc::new(labelled_schema())).unwrap();
    assert_eq!(d.rows, vec![vec![0.5, 0.0, 0.0], vec![0.25, 2.0, 1.0], vec![1.0, 1.0, 1.0]]);
}

#[test]
fn header_order_is_matched_by_name() {
    let f = csv_file("flag,x,colour\n1,0.5,green\n");
    let d = read_csv(f.path(), Arc::new(labelled_schema())).unwrap();
    assert_eq!(d.rows, vec![vec![0.5, 1.0, 1.0]]);
}

#[test]
fn unknown_label_names_row_column_and_label() {
    let f = csv_file("x,colour,flag\n0.5,red,0\n0.5,mauve,0\n");
    match read_csv(f.path(), Arc::new(labelled_schema())) {
        Err(Error::Csv { row, column, msg, .. }) => {
            assert_eq!((row, column.as_str()), (2, "colour"));
            assert!(msg.contains("mauve"), "{msg}");
        }
        other => panic!("expected a CSV error, got {other:?}"),
    }
}

#[test]
fn csv_errors_carry_locations() {
    let schema = Arc::new(labelled_schema());
    let cases = [
        ("x,colour,flag,extra\n0.5,red,0,1\n", 0, "extra"),
        ("x,colour\n0.5,red\n", 0, "flag"),
        ("x,colour,flag\nabc,red,0\n", 1, "x"),
        ("x,colour,flag\n0.5,red,2\n", 1, "flag"),
        ("x,colour,flag\n0.5,red,0\n1.5,red,0\n", 2, "x"),
    ];
    for (text, want_row, want_col) in cases {
        match read_csv(csv_file(text).path(), schema.clone()) {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column.as_str()), (want_row, want_col), "{text}"),
            other => panic!("{text}: expected a CSV error, got {other:?}"),
        }
    }
}

#[test]
fn csv_write_then_read_is_identity() {
    let schema = Arc::new(labelled_schema());
    let d = Dataset::new(schema.clone(), vec![vec![0.1 + 0.2, 2.0, 1.0], vec![1.0 / 3.0, 0.0, 0.0]]);
    let f = tempfile::NamedTempFile::new().unwrap();
    write_csv(&d, f.path()).unwrap();
    assert_eq!(read_csv(f.path(), schema).unwrap(), d);
}

#[test]
fn schema_file_round_trips() {
    let f = tempfile::NamedTempFile::new().unwrap();
    write_schema(&labelled_schema(), f.path()).unwrap();
    assert_eq!(read_schema(f.path()).unwrap(), labelled_schema());
    assert!(matches!(parse_schema("{\"variables\": [{\"name\": \"a\", \"kind\": \"continuous\", \"lo\": 1, \"hi\": 0}]}"), Err(Error::Schema(_))));
}

fn unit2() -> Arc<Schema> {
    Arc::new(Schema::new(vec![Variable::continuous("a", 0.0, 1.0), Variable::continuous("b", 0.0, 1.0)]).unwrap())
}

#[test]
fn model_round_trip_preserves_every_bit() {
    let data = generate_connected(1500, 3).unwrap();
    let spec = ConditionalSpec::new(1, vec![0]);
    let mut rng = rng_for(99);
    let probes: Vec<Vec<f64>> = (0..100)
        .map(|_| vec![rand::Rng::random(&mut rng), rand::Rng::random(&mut rng)])
        .collect();
    for mode in [Mode::Cart, Mode::Stratified, Mode::Joint, Mode::Approx] {
        for family in [LeafFamily::Gaussian, LeafFamily::LinearInterp, LeafFamily::Multilinear] {
            let m = ConditionalModel::learn(&data, &spec, &CondConfig::new(mode, family).with_seed(5)).unwrap();
            let text = encode_model(&Model::Conditional(m.clone()), &data.schema).unwrap();
            let (back, schema) = decode_model(&text).unwrap();
            assert_eq!(schema, *data.schema);
            let Model::Conditional(back) = back else { panic!("wrong payload") };
            for p in &probes {
                assert_eq!(m.log_density_row(p).to_bits(), back.log_density_row(p).to_bits(), "{mode:?} {family:?}");
            }
        }
    }
}

#[test]
fn version_is_checked_before_the_payload() {
    let text = "{\"version\": 7, \"schema_digest\": 12, \"model\": [1, 2, 3]}";
    match decode_model(text) {
        Err(Error::UnsupportedVersion { found: 7, expected }) => assert_eq!(expected, FORMAT_VERSION),
        other => panic!("expected a version error, got {other:?}"),
    }
}

#[test]
fn parse_errors_report_line_and_column() {
    match decode_model("{\n  \"version\": 1,\n  \"schema\": ]\n}") {
        Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 13)),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn digest_mismatch_is_rejected() {
    let data = Dataset::new(unit2(), vec![vec![0.2, 0.3], vec![0.7, 0.1], vec![0.4, 0.9]]);
    let m = ConditionalModel::learn(&data, &ConditionalSpec::new(0, vec![1]), &CondConfig::new(Mode::Cart, LeafFamily::Uniform)).unwrap();
    let text = encode_model(&Model::Conditional(m), &data.schema).unwrap();
    let digest = data.schema.digest();
    let tampered = text.replace(&digest, "0000000000000000");
    assert!(matches!(decode_model(&tampered), Err(Error::Data(_))));
}

#[test]
fn deep_trees_survive_encoding() {
    // a staircase of 3000 points forces a tree far deeper than 128 levels
    let rows: Vec<Vec<f64>> = (0..3000).map(|i| vec![(i as f64 + 0.5) / 3000.0, ((i * 7919) % 3000) as f64 / 3000.0]).collect();
    let data = Dataset::new(unit2(), rows);
    let mut cfg = CondConfig::new(Mode::Joint, LeafFamily::Uniform);
    cfg.max_depth = 400;
    let m = ConditionalModel::learn(&data, &ConditionalSpec::new(1, vec![0]), &cfg).unwrap();
    let text = encode_model(&Model::Conditional(m.clone()), &data.schema).unwrap();
    let (Model::Conditional(back), _) = decode_model(&text).unwrap() else { panic!() };
    assert_eq!(back, m);
}

/// Independent evaluation of the Connected mixture, restricted to the
/// square, without any normalizer.
fn connected_unnormalized(x: f64, y: f64) -> f64 {
    CONNECTED
        .iter()
        .map(|c| {
            let g = |v: f64, m: f64, s: f64| (-(v - m) * (v - m) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            c.weight * g(x, c.mean[0], c.sd[0]) * g(y, c.mean[1], c.sd[1])
        })
        .sum()
}

#[test]
fn connected_rows_lie_in_the_unit_square() {
    let d = generate_connected(CONNECTED_DESK_ROWS_FOR_TEST, 1).unwrap();
    assert_eq!(d.len(), CONNECTED_DESK_ROWS_FOR_TEST);
    assert!(d.rows.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(generate_connected(5, 4).unwrap(), generate_connected(5, 4).unwrap());
    assert!(generate_connected(0, 4).is_err());
}

const CONNECTED_DESK_ROWS_FOR_TEST: usize = generate::CONNECTED_DESK_ROWS;

#[test]
fn connected_density_is_normalized_and_matches_the_oracle() {
    let z = quad2(&connected_unnormalized, (0.0, 1.0), (0.0, 1.0), 1e-10);
    let total = quad2(&|x, y| connected_log_density(&[x, y]).exp(), (0.0, 1.0), (0.0, 1.0), 1e-10);
    assert!((total - 1.0).abs() < 1e-7, "{total}");
    for (x, y) in [(0.5, 0.5), (0.1, 0.9), (0.7, 0.7)] {
        let want = (connected_unnormalized(x, y) / z).ln();
        assert!((connected_log_density(&[x, y]) - want).abs() < 1e-7);
    }
}

/// Local maxima of a sequence, ignoring plateaus.
fn peaks(ys: &[f64]) -> usize {
    ys.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count()
}

#[test]
fn mid_range_slice_is_bimodal() {
    // analytic slice from the oracle
    for x1 in [0.4, 0.5, 0.6] {
        let ys: Vec<f64> = (0..=200).map(|i| connected_unnormalized(x1, i as f64 / 200.0)).collect();
        assert_eq!(peaks(&ys), 2, "x1 = {x1}");
    }
    // and the sampled data shows the same two modes
    let d = generate_connected(80_000, 2).unwrap();
    let mut hist = [0.0; 10];
    for r in d.rows.iter().filter(|r| (0.45..0.55).contains(&r[0])) {
        hist[((r[1] * 10.0) as usize).min(9)] += 1.0;
    }
    assert_eq!(peaks(&hist), 2, "{hist:?}");
    let norm = quad(&|y| connected_unnormalized(0.5, y), 0.0, 1.0, 1e-10);
    let dip = connected_unnormalized(0.5, 0.5) / norm;
    assert!(dip < 0.5, "density between the modes {dip}");
}

#[test]
fn profile_schemas_match_the_dataset_shapes() {
    let bio = Profile::Bio.schema();
    assert_eq!(bio.len(), 31);
    assert_eq!(bio.variables.iter().filter(|v| v.kind.is_continuous()).count(), 26);
    for v in &bio.variables {
        if let VarKind::Discrete { arity, .. } = v.kind {
            assert!((2..=3).contains(&arity));
        }
    }
    let astro = Profile::Astro.schema();
    assert_eq!(astro.len(), 68);
    let arities: Vec<u32> = astro
        .variables
        .iter()
        .filter_map(|v| match v.kind {
            VarKind::Discrete { arity, .. } => Some(arity),
            _ => None,
        })
        .collect();
    assert_eq!(arities.len(), 3);
    assert!(arities.iter().all(|a| (3..=81).contains(a)));
    assert_eq!((*arities.iter().min().unwrap(), *arities.iter().max().unwrap()), (3, 81));
}

#[test]
fn ground_truth_conditionals_are_normalized() {
    let truth = GroundTruth::random(Profile::Bio, 8);
    let d = truth.sample(5, &mut rng_for(1));
    for row in &d.rows {
        for v in 0..truth.vars.len() {
            let mass = match truth.schema.kind(v) {
                VarKind::Continuous { .. } => quad(
                    &|x| {
                        let mut r = row.clone();
                        r[v] = x;
                        truth.log_conditional(v, &r).exp()
                    },
                    0.0,
                    1.0,
                    1e-11,
                ),
                VarKind::Discrete { arity, .. } => (0..*arity)
                    .map(|x| {
                        let mut r = row.clone();
                        r[v] = f64::from(x);
                        truth.log_conditional(v, &r).exp()
                    })
                    .sum(),
            };
            assert!((mass - 1.0).abs() < 1e-8, "variable {v}: {mass}");
        }
    }
}

#[test]
fn ground_truth_beats_learned_models_on_held_out_rows() {
    let s = generate_standin(Profile::Bio, 3000, 4).unwrap();
    let train = s.data.subset(&(0..2000).collect::<Vec<_>>());
    let test = s.data.subset(&(2000..3000).collect::<Vec<_>>());
    let parents: Vec<Vec<usize>> = s.truth.vars.iter().map(|v| v.parents.clone()).collect();
    let structure = NetworkStructure::from_parents(parents, 3).unwrap();
    let truth_ll = s.truth.log_likelihood(&test) / test.len() as f64;
    for (mode, family) in [(Mode::Cart, LeafFamily::Gaussian), (Mode::Approx, LeafFamily::Multilinear)] {
        let m = crate::bnet::FactoredModel::learn(&train, &structure, &CondConfig::new(mode, family).with_seed(2)).unwrap();
        let learned = m.joint_log_likelihood(&test).per_row(test.len());
        assert!(truth_ll + 1.0 >= learned, "truth {truth_ll} vs {mode:?} {learned}");
    }
    assert_eq!(s.data.schema.len(), 31);
    assert_eq!(generate_standin(Profile::Bio, 50, 4).unwrap(), generate_standin(Profile::Bio, 50, 4).unwrap());
}

#[test]
fn standin_root_variable_follows_its_cdf() {
    let s = generate_standin(Profile::Astro, 4000, 6).unwrap();
    assert!(s.truth.vars[0].parents.is_empty());
    let dens = |x: f64| s.truth.log_conditional(0, &[x]).exp();
    let mut xs: Vec<f64> = s.data.column(0).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut cdf = 0.0;
    let mut prev = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        cdf += quad(&dens, prev, x, 1e-12);
        prev = x;
        d = d.max((cdf - i as f64 / n).abs()).max((cdf - (i + 1) as f64 / n).abs());
    }
    // 1% critical value of the one-sample KS statistic
    assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
}

fn conditional_experiment(algs: &[&str], seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        algs.iter().map(|a| Algorithm::parse(a).unwrap()).collect(),
        Task::Conditional(ConditionalSpec::new(1, vec![0])),
    );
    cfg.folds = 4;
    cfg.seed = seed;
    cfg
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let d = generate_connected(1200, 5).unwrap();
    let cfg = conditional_experiment(&["cart-gauss", "stratified-uniform", "approx-ili"], 9);
    let a = run_experiment(&d, &cfg).unwrap();
    let b = run_experiment(&d, &cfg).unwrap();
    for f in [ReportFormat::Tsv, ReportFormat::Json] {
        assert_eq!(format_report(&a, f), format_report(&b, f));
    }
}

#[test]
fn approx_visits_one_leaf_and_exact_more() {
    let d = generate_connected(1500, 6).unwrap();
    let rows = run_experiment(&d, &conditional_experiment(&["approx-ili", "joint-ili", "stratified-ili"], 1)).unwrap();
    assert_eq!(rows[0].mean_visited, 1.0);
    assert!(rows[1].mean_visited > 1.0, "{}", rows[1].mean_visited);
    assert_eq!(rows[2].mean_visited, 1.0);
}

#[test]
fn empty_report_is_header_only() {
    assert_eq!(format_report(&[], ReportFormat::Tsv), format!("{}\n", experiment::TSV_HEADER));
}

fn row(label: &str, fold_ll: Vec<f64>) -> ReportRow {
    ReportRow {
        label: label.into(),
        mean_ll: crate::stats::mean(&fold_ll),
        ci95: crate::stats::ci_half_width(&fold_ll, 0.95),
        learn_s: 0.125,
        eval_s: 1e-7,
        best: false,
        fold_ll,
        mean_visited: 1.0,
    }
}

#[test]
fn json_round_trip_reproduces_the_tsv() {
    let rows = vec![row("a", vec![0.1, 0.2 + 0.1, -1234.5678e-9]), row("b", vec![1.0 / 3.0, 2.0, 5e-324])];
    let json = format_report(&rows, ReportFormat::Json);
    let back = parse_report_json(&json).unwrap();
    assert_eq!(back, rows);
    assert_eq!(format_report(&back, ReportFormat::Tsv), format_report(&rows, ReportFormat::Tsv));
}

#[test]
fn best_flag_marks_argmax_and_indistinguishable_rows() {
    let d = generate_connected(2000, 7).unwrap();
    let rows = run_experiment(&d, &conditional_experiment(&["cart-gauss", "stratified-uniform", "stratified-ili", "approx-ili"], 3)).unwrap();
    let best = rows.iter().enumerate().max_by(|a, b| a.1.mean_ll.total_cmp(&b.1.mean_ll)).unwrap().0;
    for (i, r) in rows.iter().enumerate() {
        let significant = crate::stats::paired_t_significant(&rows[best].fold_ll, &r.fold_ll, 0.05);
        assert_eq!(r.best, i == best || !significant, "{}", r.label);
    }
    assert!(rows[best].best);
}

#[test]
fn fold_failures_carry_the_fold_id() {
    // more mixture components than training rows
    let d = Dataset::new(unit2(), (0..20).map(|i| vec![i as f64 / 20.0, ((i * 3) % 20) as f64 / 20.0]).collect());
    let mut cfg = ExperimentConfig::new(
        vec![Algorithm {
            label: "gmm".into(),
            method: Method::GmmBaseline {
                grid: vec![40],
                validation_fraction: 0.2,
            },
        }],
        Task::Joint(NetworkStructure::empty(2, 2)),
    );
    cfg.folds = 2;
    match run_experiment(&d, &cfg) {
        Err(Error::Fold { fold: 0, .. }) => {}
        other => panic!("expected a fold error, got {other:?}"),
    }
}

#[test]
fn joint_methods_reject_conditional_tasks() {
    let d = generate_connected(100, 1).unwrap();
    for alg in ["bnet", "gmm-baseline", "joint-linreg"] {
        let err = run_experiment(&d, &conditional_experiment(&[alg], 1)).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{alg}: {err}");
    }
    assert!(Algorithm::parse("sideways-ili").is_err());
}

#[test]
fn preprocessing_scales_then_adds_clamped_noise() {
    let schema = Arc::new(Schema::new(vec![Variable::continuous("a", -10.0, 10.0)]).unwrap());
    let d = Dataset::new(schema, (0..50).map(|i| vec![i as f64 / 10.0 - 2.0]).collect());
    let cfg = Preprocess {
        scale: true,
        noise: Some((crate::data::NoiseKind::Uniform, 0.01)),
    };
    let out = preprocess(&d, &cfg, 3).unwrap();
    assert!(out.rows.iter().all(|r| (0.0..=1.0).contains(&r[0])));
    for (a, b) in out.rows.iter().zip(&d.rows) {
        let scaled = (b[0] + 2.0) / 4.9;
        assert!((a[0] - scaled).abs() <= 0.005 + 1e-12);
    }
    assert_eq!(preprocess(&d, &cfg, 3).unwrap(), out);
}
