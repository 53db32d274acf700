//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Each criterion runs the seeded sweep from `sicprop::verify` and, where a
//! reference value was computed offline in 40-digit arithmetic, also checks
//! that frozen value. The process fails only for criteria outside the
//! documented known-limit list.

use std::process::ExitCode;
use std::time::Instant;

use sicprop::green_calculus::{harmonic_green, mehler_kernel, SicInterval};
use sicprop::oscillator_basis::{coherent_wavefunction, expand_state, harmonic_eigensystem, PhysicalParams};
use sicprop::verify::{run_criterion, CRITERIA};
use sicprop::{Exec, LogicalSign, C64};

const SEED: u64 = 20_260_416;

/// Frozen references, keyed by criterion, as (label, passed).
fn frozen(id: u8) -> Vec<(&'static str, bool)> {
    match id {
        5 => {
            let p = PhysicalParams::default();
            let state = expand_state(coherent_wavefunction(p, 1.0), &harmonic_eigensystem(p), 48).unwrap();
            let nres = state.residual_norm(16).unwrap();
            vec![("coherent residual at 16 levels", (nres / 1.366_661_429_604_3e-7 - 1.0).abs() < 1e-6)]
        }
        6 => {
            let (_, c) = mehler_kernel(1.0, -1.0, C64::from(0.8), 1).unwrap();
            let (s, cz) = mehler_kernel(0.5, -1.2, C64::from_polar(0.6, 1.1), 200).unwrap();
            let want = C64::new(0.822_376_426_652_342_1, -0.782_605_509_519_677);
            let (s33, c33) = mehler_kernel(3.0, 3.0, C64::from(0.9), 200).unwrap();
            let rel33 = ((s33 - c33) / c33).re;
            vec![
                ("closed form at s = 0.8", (c.re - 5.591_043_798_375_198e-4).abs() < 1e-17),
                ("complex s series and closed form", (cz - want).norm() < 1e-14 && (s - want).norm() < 1e-14),
                ("known tail at x = y = 3, s = 0.9", (rel33 + 1.4509e-10).abs() < 1e-13),
            ]
        }
        7 => {
            let p = PhysicalParams::new(1.3, 0.9, 1.1).unwrap();
            let g = harmonic_green(0.3, 1.2, &SicInterval::new(0.7, LogicalSign::Plus).unwrap(), &p).unwrap();
            let want = C64::new(0.508_935_362_952_917_6, -0.168_290_292_486_959_62);
            vec![("harmonic kernel against the Mehler-sum value", (g - want).norm() < 1e-14)]
        }
        _ => Vec::new(),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut unexpected = 0;
    for id in 1..=CRITERIA as u8 {
        let t = Instant::now();
        let report = run_criterion(id, SEED, Exec::default()).expect("valid id");
        let refs = frozen(id);
        let refs_ok = refs.iter().all(|(_, ok)| *ok);
        let passed = report.passed && refs_ok;
        let tag = if passed { "PASS" } else { "FAIL" };
        let note = if !passed && report.known_limit() { " [known limit]" } else { "" };
        println!(
            "criterion {:>2} {:<28} {tag}{note}  measured {:.3e} vs {:.1e}  ({:.1}s)",
            id,
            report.name,
            report.measured,
            report.tolerance,
            t.elapsed().as_secs_f64()
        );
        println!("    {}", report.detail);
        for (label, ok) in &refs {
            println!("    reference {label}: {}", if *ok { "ok" } else { "MISMATCH" });
        }
        // a frozen-reference mismatch is never excused
        if !refs_ok || (!passed && !report.known_limit()) {
            unexpected += 1;
        }
    }
    println!("acceptance finished in {:.1}s, {unexpected} unexpected failure(s)", start.elapsed().as_secs_f64());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
