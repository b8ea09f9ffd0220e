//! Deterministic CSV and JSON emission. Floats are written with the shortest
//! round-trip formatting, structs serialize in declaration order, and nothing
//! time- or environment-dependent enters the artifacts, so identical inputs
//! produce byte-identical files.

use std::fmt::Write as _;

use serde::Serialize;

use crate::algebra::GeometrySpec;
use crate::error::{CoreError, Result};
use crate::reduced::{kinetic_energy, ReducedTrajectory};
use crate::sde::PathEnsemble;
use crate::torus::{energy_h1, energy_l2, FluidTrajectory, ModeSet};

/// Reduced trajectory as CSV with columns t,u1,u2,u3,energy.
pub fn trajectory_csv(traj: &ReducedTrajectory, geo: &GeometrySpec) -> String {
    let dim = traj.state(0).dim();
    let mut out = String::from("t");
    for c in 1..=dim {
        let _ = write!(out, ",u{c}");
    }
    out.push_str(",energy\n");
    for (t, u) in traj.times().iter().zip(traj.states()) {
        let _ = write!(out, "{t}");
        for x in u.as_slice() {
            let _ = write!(out, ",{x}");
        }
        let _ = writeln!(out, ",{}", kinetic_energy(u, geo));
    }
    out
}

/// Sample paths as CSV with columns t,r11..r33,sample (row-major matrix entries).
pub fn ensemble_csv(ens: &PathEnsemble, max_samples: usize) -> String {
    let mut out = String::from("t,r11,r12,r13,r21,r22,r23,r31,r32,r33,sample\n");
    for (sample, path) in ens.paths.iter().take(max_samples).enumerate() {
        for (t, g) in ens.times.iter().zip(path) {
            let _ = write!(out, "{t}");
            let m = g.matrix();
            for r in 0..3 {
                for c in 0..3 {
                    let _ = write!(out, ",{}", m[(r, c)]);
                }
            }
            let _ = writeln!(out, ",{sample}");
        }
    }
    out
}

/// Fluid run as long-format CSV: one row per (time, representative mode).
pub fn fluid_csv(traj: &FluidTrajectory, modes: &ModeSet) -> String {
    let mut out = String::from("t,k1,k2,a,b,energy_l2,energy_h1\n");
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let el2 = energy_l2(u, modes);
        let eh1 = energy_h1(u, modes);
        for (&k, &(a, b)) in modes.reps().iter().zip(u.coeffs()) {
            let _ = writeln!(out, "{t},{},{},{a},{b},{el2},{eh1}", k.0, k.1);
        }
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CoreError::InvalidParameter(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}
