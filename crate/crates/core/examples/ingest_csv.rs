//! Reading long-format data and building design matrices.
//!
//! Input rows are `subject_id,marker_id,time,value`; marker families come from
//! the command line as `name=family` pairs.
//!
//! `cargo run --example ingest_csv -- [path] [name=family ...]`

use bcc::family::Family;
use bcc::longdata::{build_designs, ingest_csv, DesignSpec, MarkerSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args.first().cloned().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/long_small.csv").to_string());
    let markers: Vec<MarkerSpec> = if args.len() > 1 {
        args[1..]
            .iter()
            .map(|a| {
                let (name, fam) = a.split_once('=').ok_or("expected name=family")?;
                let family: Family = serde_json::from_value(serde_json::Value::String(fam.to_string()))?;
                Ok(MarkerSpec::new(name, family))
            })
            .collect::<Result<_, Box<dyn std::error::Error>>>()?
    } else {
        vec![
            MarkerSpec::new("continuous", Family::Gaussian),
            MarkerSpec::new("count", Family::Poisson),
            MarkerSpec::new("binary", Family::Binomial),
        ]
    };

    let data = ingest_csv(&path, markers)?;
    println!("{} subjects, {} markers", data.n_subjects(), data.n_markers());
    for (r, m) in data.markers().iter().enumerate() {
        let means: Vec<f64> = (0..data.n_subjects()).map(|i| data.series(i, r).mean()).collect();
        let overall = means.iter().sum::<f64>() / means.len() as f64;
        println!("  {:<12} {:<9} {:>5} observations, mean of subject means {overall:.3}", m.name, m.family.name(), data.marker_total(r));
    }

    let designs = build_designs(&data, &DesignSpec::linear_random_intercept(data.n_markers()))?;
    let first = data.subject_ids()[0].clone();
    let d = designs.get(0, 0);
    println!("subject {first}, marker 1: X is {}x{}, Z is {}x{}", d.x.nrows(), d.x.ncols(), d.z.nrows(), d.z.ncols());
    println!("{}", d.x);
    Ok(())
}
