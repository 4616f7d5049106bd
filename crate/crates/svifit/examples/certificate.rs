//! Numerical convergence certification of a recorded trajectory.
//!
//! The monitor locates the first step whose coefficient deltas fall below a
//! threshold, bounds the tail, evaluates the update-map gains and drift
//! bounds, and tests a sufficient contraction condition. The condition is
//! conservative: fits routinely converge without satisfying it, and the
//! monitor reports rather than enforces.
//!
//! ```sh
//! cargo run --example certificate
//! ```

use svifit::{certify, fpi_fit, min_point_method_ii, simulate_case, Anchor, FpiConfig};

fn main() -> svifit::Result<()> {
    let (smile, _) = simulate_case(1)?;
    let mp = min_point_method_ii(&smile);
    let anchor = Anchor::from_min_point(&mp);
    let (_, trace) = fpi_fit(&smile, &anchor, &FpiConfig::fixed_iterations(50))?;

    let cert = certify(&trace, &smile, &anchor, 0.5, 0.4, 0.01);

    println!("coefficient deltas (first 12 steps):");
    for (i, d) in cert.coefficient_deltas.iter().take(12).enumerate() {
        println!(
            "  step {:>2}: |da|={:.2e} |db|={:.2e} |drho|={:.2e}",
            i + 1,
            d[0],
            d[1],
            d[2]
        );
    }
    println!("\nn0 (first step with all deltas < {}): {:?}", cert.delta, cert.n0);
    println!("tail: {} steps", cert.tail_len);
    println!("b lower bound: {:?}", cert.b_lower);
    println!("|rho| upper bound: {:?}", cert.rho_upper);
    println!("a nonnegative over the tail: {:?}", cert.a_nonneg);
    println!("update gains (m, sigma): {:?}, {:?}", cert.gain_m, cert.gain_sigma);
    println!("sup |update map| over tail: {:?}", cert.update_map_sup);
    println!(
        "contraction condition (< (1-alpha)L = {}): {:?}",
        (1.0 - cert.alpha) * cert.contraction_target,
        cert.contraction_condition_holds
    );
    println!("2L < b lower bound: {:?}", cert.contraction_below_b_lower);
    if let Some(mono) = cert.monotonicity {
        println!(
            "tail monotonicity: a {:?}, b {:?}, rho {:?}, m {:?}, sigma {:?}",
            mono.a, mono.b, mono.rho, mono.m, mono.sigma
        );
    }
    Ok(())
}
