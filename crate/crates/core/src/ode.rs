//! Dormand-Prince 5(4) with a per-step hook that may modify the state
//! (used to re-project a flow back onto its target level).

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h0: 1e-2,
            h_min: 1e-12,
            max_steps: 200_000,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OdeFailure<E> {
    StepUnderflow { t: f64 },
    TooManySteps { t: f64 },
    Rhs { t: f64, error: E },
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = rhs(t, y)` from `t0` to `t1`. After every accepted step
/// `on_accept(t, y)` runs and may adjust `y`; an error from it aborts.
pub fn integrate<E, F, H>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    opts: &OdeOptions,
    mut on_accept: H,
) -> Result<(Vec<f64>, OdeStats), OdeFailure<E>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
    H: FnMut(f64, &mut Vec<f64>) -> Result<(), E>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = opts.h0.min(t1 - t0);
    let mut stats = OdeStats::default();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = rhs(t, &y).map_err(|error| OdeFailure::Rhs { t, error })?;
    while t < t1 {
        if stats.accepted + stats.rejected > opts.max_steps {
            return Err(OdeFailure::TooManySteps { t });
        }
        if h < opts.h_min {
            return Err(OdeFailure::StepUnderflow { t });
        }
        let h_step = h.min(t1 - t);
        let mut stage_failed = None;
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..n {
                        ys[i] += h_step * a * kj[i];
                    }
                }
            }
            match rhs(t + C[s] * h_step, &ys) {
                Ok(v) => k[s] = v,
                Err(e) => {
                    stage_failed = Some(e);
                    break;
                }
            }
        }
        if let Some(error) = stage_failed {
            // a stage left the admissible region; retry smaller
            stats.rejected += 1;
            h = h_step * 0.25;
            if h < opts.h_min {
                return Err(OdeFailure::Rhs { t, error });
            }
            continue;
        }
        let mut y5 = y.clone();
        let mut err = 0.0f64;
        for i in 0..n {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] += h_step * d5;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            let e = h_step * (d5 - d4) / sc;
            err = err.max(e.abs());
        }
        if err <= 1.0 {
            t += h_step;
            y = y5;
            stats.accepted += 1;
            on_accept(t, &mut y).map_err(|error| OdeFailure::Rhs { t, error })?;
            k[0] = rhs(t, &y).map_err(|error| OdeFailure::Rhs { t, error })?;
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = h_step * fac;
        } else {
            stats.rejected += 1;
            h = h_step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let (y, stats) = integrate::<(), _, _>(
            |_, y| Ok(vec![-y[0]]),
            0.0,
            2.0,
            &[1.0],
            &OdeOptions::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-8);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_keeps_energy() {
        let (y, _) = integrate::<(), _, _>(
            |_, y| Ok(vec![y[1], -y[0]]),
            0.0,
            10.0,
            &[1.0, 0.0],
            &OdeOptions::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - 10.0f64.cos()).abs() < 1e-6);
        assert!((y[1] + 10.0f64.sin()).abs() < 1e-6);
    }
}
