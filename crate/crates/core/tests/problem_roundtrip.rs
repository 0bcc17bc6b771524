use dirac_spectral::{BoundaryMatrix, EndpointData, EndpointRecord, Potential, ProblemSpec, Tolerances, C64};
use proptest::prelude::*;

fn expr() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["0", "1", "x^0.5", "sin(2*x)+i", "exp(-x)*(1-2*i)", "abs(x-1.5)", "(pi-x)^-0.25"])
        .prop_map(str::to_string)
}

fn record() -> impl Strategy<Value = Option<EndpointRecord>> {
    prop::option::of((0.1..3.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(r, a, b)| {
        EndpointRecord::new(r, C64::new(a, b)).unwrap()
    }))
}

proptest! {
    #[test]
    fn spec_survives_json(
        p in expr(), q in expr(),
        rows in prop::array::uniform2(prop::array::uniform4(-2.0..2.0f64)),
        grid in 16usize..200,
        tol in 1e-15..1e-6f64,
        ends in prop::array::uniform4(record()),
    ) {
        let Ok(bc) = BoundaryMatrix::from_real(rows) else { return Ok(()) };
        let data = EndpointData { p_at_0: ends[0], p_at_pi: ends[1], q_at_0: ends[2], q_at_pi: ends[3] };
        let pot = Potential::from_exprs(&p, &q).unwrap().with_endpoint_data(data).unwrap();
        let tolerances = Tolerances { series_tol: tol, ..Tolerances::default() };
        let spec = ProblemSpec::new(pot, bc, grid, tolerances).unwrap();
        let text = spec.to_json().unwrap();
        let back = ProblemSpec::from_json(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(back.spec_hash(), spec.spec_hash());
        prop_assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn malformed_file_reports_position() {
    let err = ProblemSpec::from_json("{\n  \"bc\": [[1,0,0,0]\n").unwrap_err();
    assert!(err.to_string().contains("line"), "{err}");
}
