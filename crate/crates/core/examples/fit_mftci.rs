//! Fit the influence model and watch the ADMM residuals shrink, first step by
//! step through `Fitter`, then in one call with `fit`.
//!
//! `cargo run --release --example fit_mftci`

use gradecast::eval::predict_batch;
use gradecast::mftci::Fitter;
use gradecast::{fit, generate_synthetic, report, MftciHyper, SyntheticConfig};

fn main() -> gradecast::Result<()> {
    let (data, _) = generate_synthetic(&SyntheticConfig::default())?;
    let (train, test) = data.split_by_term(data.last_term())?;
    let hyper = MftciHyper { k: 3, gamma: 1.0, ..MftciHyper::default() };

    let mut fitter = Fitter::new(&train, hyper.clone())?;
    println!(
        "{} training grades, {} co-taken course pairs",
        fitter.n_dyads(),
        fitter.model().mask.len()
    );
    println!("{:>4}  {:>10}  {:>10}  {:>10}", "iter", "objective", "||A-Z1||", "||A-Z2||");
    for _ in 0..50 {
        let s = fitter.iterate()?;
        if s.iteration == 1 || s.iteration % 10 == 0 {
            println!("{:>4}  {:>10.3}  {:>10.2e}  {:>10.2e}", s.iteration, s.objective, s.primal_r1, s.primal_r2);
        }
    }

    let (model, state) = fit(&train, hyper)?;
    println!("\nfit(): {} outer iterations", state.iterations());
    let batch = predict_batch(&model, &test, &train);
    let r = report(&batch, data.scale(), false)?;
    println!("held-out term {}: MAE {:.3}, RMSE {:.3}, Pct0 {:.1}", data.last_term(), r.mae, r.rmse, r.pct0);

    let mut trace = Vec::new();
    state.write_trace_csv(&mut trace)?;
    println!("trace CSV starts with: {}", String::from_utf8_lossy(&trace).lines().next().unwrap_or(""));
    Ok(())
}
