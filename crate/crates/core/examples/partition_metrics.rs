//! Agreement between two clusterings.
//!
//! With two CSV paths (`subject,label` or any two columns) compares them;
//! otherwise walks through a few hand-made pairs.
//!
//! `cargo run --example partition_metrics -- [a.csv b.csv]`

use bcc::metrics::{adjusted_adherence, adjusted_rand, jaccard_pair, Partition};

fn report(name: &str, a: &Partition, b: &Partition) -> bcc::Result<()> {
    let ari = adjusted_rand(a, b)?;
    let jac = jaccard_pair(a, b)?;
    let flag = |d: bool| if d { " (degenerate)" } else { "" };
    println!("{name:<28} aRand {:>7.4}{}  Jaccard {:>7.4}{}", ari.value, flag(ari.degenerate), jac.value, flag(jac.degenerate));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [a, b] = args.as_slice() {
        let (ids_a, pa) = Partition::read_csv(a)?;
        let (ids_b, pb) = Partition::read_csv(b)?;
        if ids_a != ids_b {
            return Err("the two files list different subjects".into());
        }
        return Ok(report("files", &pa, &pb)?);
    }

    let truth = Partition::new(vec![1, 1, 1, 2, 2, 2, 3, 3, 3])?;
    report("identical", &truth, &truth)?;
    report("relabelled", &truth, &Partition::new(vec![7, 7, 7, 4, 4, 4, 9, 9, 9])?)?;
    report("one subject moved", &truth, &Partition::new(vec![1, 1, 2, 2, 2, 2, 3, 3, 3])?)?;
    report("two clusters merged", &truth, &Partition::new(vec![1, 1, 1, 1, 1, 1, 3, 3, 3])?)?;
    report("orthogonal", &truth, &Partition::new(vec![1, 2, 3, 1, 2, 3, 1, 2, 3])?)?;
    report("all singletons", &Partition::new((0..9).collect())?, &Partition::new((10..19).collect())?)?;

    println!();
    for k in [2, 3, 4] {
        let a: Vec<String> = [1.0 / k as f64, 0.8, 1.0].iter().map(|&x| format!("{:.3}", adjusted_adherence(x, k).unwrap())).collect();
        println!("K={k}: adjusted adherence of alpha = 1/K, 0.8, 1 -> {}", a.join(", "));
    }
    Ok(())
}
