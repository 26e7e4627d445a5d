//! Brute-force estimates of the regime-B and regime-C no-crossing
//! probabilities from discretised bridges. Slow; run on demand with
//! `cargo test -p confluent-bridge --test coin_oracle -- --ignored --nocapture`
//! and paste the printed table into the acceptance suite.

use confluent_bridge::cdb::coins::{converged_probability, Regime, RegimeCoinInput};
use confluent_bridge::rng::RngStream;

const STEP: f64 = 1e-3;
const ACCEPTED: usize = 1_000_000;

fn replicates() -> usize {
    std::env::var("ORACLE_REPLICATES").ok().and_then(|v| v.parse().ok()).unwrap_or(ACCEPTED)
}

pub const B_INPUTS: [((f64, f64), (f64, f64), f64); 20] = [
    ((1.0, 1.0), (1.0, 1.0), 1.0),
    ((0.5, 0.8), (0.9, 0.4), 1.0),
    ((1.2, 0.3), (0.4, 1.0), 1.0),
    ((0.7, 0.7), (1.5, 1.5), 2.0),
    ((0.4, 0.6), (0.6, 0.5), 0.5),
    ((1.0, -1.0), (1.0, -1.0), 1.0),
    ((0.5, -0.3), (0.8, -0.9), 1.0),
    ((1.3, -0.4), (0.6, -1.2), 1.5),
    ((0.6, -0.6), (0.3, -0.9), 0.5),
    ((0.9, -1.4), (1.1, -0.5), 2.0),
    ((-1.0, 1.0), (-0.7, 0.8), 1.0),
    ((-0.5, 0.9), (-1.2, 0.4), 1.0),
    ((-0.8, 0.3), (-0.4, 0.6), 0.5),
    ((-1.1, 1.1), (-0.9, 1.3), 2.0),
    ((-1.0, -1.0), (-0.6, -0.9), 1.0),
    ((-0.4, -0.8), (-0.9, -0.3), 1.0),
    ((-1.2, -0.5), (-0.5, -1.1), 1.5),
    ((-0.6, -0.6), (-0.8, -0.4), 0.5),
    ((0.3, 0.3), (0.3, 0.3), 1.0),
    ((1.5, 0.5), (1.5, 0.5), 1.0),
];

pub const C_INPUTS: [((f64, f64), f64, f64); 10] = [
    ((1.0, 1.0), 1.0, 1.0),
    ((0.5, 0.8), 0.6, 1.0),
    ((1.2, 0.4), 1.0, 2.0),
    ((1.0, -1.0), -1.0, 1.0),
    ((0.6, -0.4), -0.8, 0.5),
    ((1.4, -1.0), -0.6, 2.0),
    ((-1.0, 0.7), 0.9, 1.0),
    ((-0.7, 1.2), 0.5, 1.0),
    ((-1.0, -1.0), -1.0, 1.0),
    ((-0.5, -0.9), -1.2, 1.5),
];

/// One forward step of a bridge with variance rate `s2` heading to `end` at `remaining`.
fn bridge_step(rng: &mut RngStream, cur: f64, end: f64, remaining: f64, dt: f64, s2: f64) -> f64 {
    if remaining <= dt * (1.0 + 1e-9) {
        return end;
    }
    let mean = cur + (end - cur) * dt / remaining;
    let var = s2 * dt * (remaining - dt) / remaining;
    mean + var.sqrt() * rng.std_normal()
}

/// Whether a variance-2 bridge between `a` and `b` over `dt` touches zero.
fn step_crosses(rng: &mut RngStream, a: f64, b: f64, dt: f64) -> bool {
    if a * b <= 0.0 {
        return true;
    }
    rng.uniform() < (-a * b / dt).exp()
}

fn oracle_b(rng: &mut RngStream, g0: (f64, f64), gt: (f64, f64), len: f64) -> (usize, usize) {
    let steps = (len / STEP).round() as usize;
    let dt = len / steps as f64;
    let (v0, vt) = (g0.1 - g0.0 / 2.0, gt.1 - gt.0 / 2.0);
    let mut accepted = 0;
    let mut clear = 0;
    while accepted < replicates() {
        let (mut g1, mut v) = (g0.0, v0);
        let mut g2 = g0.1;
        let mut g2_crossed = false;
        let mut ok = true;
        for k in 0..steps {
            let remaining = len - k as f64 * dt;
            let n1 = bridge_step(rng, g1, gt.0, remaining, dt, 2.0);
            let nv = bridge_step(rng, v, vt, remaining, dt, 1.5);
            let n2 = nv + n1 / 2.0;
            if step_crosses(rng, g1, n1, dt) {
                ok = false;
                break;
            }
            if !g2_crossed && step_crosses(rng, g2, n2, dt) {
                g2_crossed = true;
            }
            g1 = n1;
            v = nv;
            g2 = n2;
        }
        if ok {
            accepted += 1;
            if !g2_crossed {
                clear += 1;
            }
        }
    }
    (clear, accepted)
}

fn oracle_c(rng: &mut RngStream, g0: (f64, f64), gt2: f64, len: f64) -> (usize, usize) {
    let steps = (len / STEP).round() as usize;
    let dt = len / steps as f64;
    let sign = g0.0.signum();
    let a = g0.0.abs();
    let (v0, vt) = (g0.1 - g0.0 / 2.0, gt2);
    let mut clear = 0;
    for _ in 0..replicates() {
        let mut b = [0.0f64; 3];
        let mut v = v0;
        let mut g2 = g0.1;
        let mut crossed = false;
        for k in 0..steps {
            let remaining = len - k as f64 * dt;
            for c in b.iter_mut() {
                *c = bridge_step(rng, *c, 0.0, remaining, dt, 2.0);
            }
            let t = (k + 1) as f64 * dt;
            let mu = a * (1.0 - t / len);
            let g1 = sign * ((mu + b[0]).powi(2) + b[1] * b[1] + b[2] * b[2]).sqrt();
            v = bridge_step(rng, v, vt, remaining, dt, 1.5);
            let n2 = v + g1 / 2.0;
            if step_crosses(rng, g2, n2, dt) {
                crossed = true;
                break;
            }
            g2 = n2;
        }
        if !crossed {
            clear += 1;
        }
    }
    (clear, replicates())
}

#[test]
#[ignore = "takes tens of minutes; regenerates frozen oracle values"]
fn generate_coin_oracle() {
    let mut rng = RngStream::new(20_260_101, 0);
    println!("B:");
    for (g0, gt, len) in B_INPUTS {
        let (clear, n) = oracle_b(&mut rng, g0, gt, len);
        let series = converged_probability(&RegimeCoinInput::new(g0, gt, len), Regime::B, 1e-10)
            .map(|r| r.0)
            .unwrap_or(f64::NAN);
        println!("    ({g0:?}, {gt:?}, {len:?}, {clear}, {n}), // series {series:.5}, oracle {:.5}", clear as f64 / n as f64);
    }
    println!("C:");
    for (g0, gt2, len) in C_INPUTS {
        let (clear, n) = oracle_c(&mut rng, g0, gt2, len);
        let series = converged_probability(&RegimeCoinInput::new(g0, (0.0, gt2), len), Regime::C, 1e-10)
            .map(|r| r.0)
            .unwrap_or(f64::NAN);
        println!("    ({g0:?}, {gt2:?}, {len:?}, {clear}, {n}), // series {series:.5}, oracle {:.5}", clear as f64 / n as f64);
    }
}
