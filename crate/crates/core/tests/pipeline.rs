use casecontrol::ar::{ar_curve, ArConfig};
use casecontrol::data::ingest_reader;
use casecontrol::oracle::{project, random_population, ObservedLaw, PopulationConstraints};
use casecontrol::rr::{estimate_betas, rr_band, ClipOptions, Method, PGrid};
use casecontrol::synthetic::{cell_counts, draw_mc_sample, expand_law, McDesign};
use casecontrol::{BasisSpec, CsvSchema, Design, LogitOptions, RngSpec, H0};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn csv_round_trip_preserves_estimates() {
    let mut rng = RngSpec::new(8).stream(50, 0);
    let data = draw_mc_sample(
        &McDesign {
            n_per_stratum: 400,
            ..Default::default()
        },
        &mut rng,
    )
    .unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let back = ingest_reader(
        buf.as_slice(),
        &CsvSchema::default(),
        Design::CaseControl,
        H0::Estimate,
    )
    .unwrap()
    .dataset;
    assert_eq!(back, data);
    let spec = BasisSpec::linear();
    let opts = LogitOptions::default();
    let a = estimate_betas(
        &data,
        &spec,
        &spec,
        Method::Combined,
        &opts,
        &ClipOptions::default(),
    )
    .unwrap();
    let b = estimate_betas(
        &back,
        &spec,
        &spec,
        Method::PlugIn,
        &opts,
        &ClipOptions::default(),
    )
    .unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.value - y.value).abs() < 1e-6);
    }
    let band = rr_band(
        &a[0],
        Some(&a[1]),
        0.05,
        Design::CaseControl,
        &PGrid::new(0.15, 0.01).unwrap(),
    )
    .unwrap();
    assert_eq!(band.rows.len(), 16);
    assert!(band
        .rows
        .iter()
        .all(|r| r.upper >= r.point && r.point >= 1.0));
}

#[test]
fn missing_fields_drop_rows() {
    let csv = "y,t,x\n1,1,0.5\n0,NA,1.0\n0,0,\n1,0,2.0\n0,1,3.0\n";
    let ing = ingest_reader(
        csv.as_bytes(),
        &CsvSchema::default(),
        Design::CaseControl,
        H0::Estimate,
    )
    .unwrap();
    assert_eq!(ing.dataset.n(), 3);
    assert_eq!(ing.dropped_rows, vec![2, 3]);
}

fn oracle_dataset(seed: u64) -> (ObservedLaw, casecontrol::ObservedDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pop = random_population(
        &mut rng,
        3,
        PopulationConstraints {
            mtr: true,
            mts: true,
            unconfounded: false,
        },
    );
    let law = project(&pop, Design::CaseControl, 0.5).unwrap();
    let data = expand_law(&law, 20_000).unwrap();
    let empirical =
        ObservedLaw::from_cell_counts(Design::CaseControl, &cell_counts(&data).unwrap()).unwrap();
    (empirical, data)
}

#[test]
fn ar_curve_on_expanded_law_matches_oracle() {
    let (law, data) = oracle_dataset(31);
    let cfg = ArConfig {
        retro_spec: BasisSpec::categorical(),
        pro_spec: BasisSpec::categorical(),
        grid: PGrid::new(1.0, 0.05).unwrap(),
        b: 200,
        seed: 2,
        ..Default::default()
    };
    let (curve, diag) = ar_curve(&data, &cfg).unwrap();
    assert_eq!(curve.rows.len(), 21);
    for row in &curve.rows {
        assert!((row.point - law.ub_ar(row.p)).abs() < 1e-8, "p={}", row.p);
        assert!(row.upper >= row.point && row.upper <= 1.0);
    }
    assert_eq!(curve.rows[0].point, 0.0);
    assert_eq!(curve.rows[20].point, 0.0);
    assert_eq!(diag.mu_star.len(), 21);
}
