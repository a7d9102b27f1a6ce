//! Dormand–Prince 8(5,3) with the step-size controller of Hairer & Wanner,
//! for matrix-valued states over real or complex scalars.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const STAGES: usize = 12;

const C: [f64; 12] = [0.0, 0.05260015195876773, 0.0789002279381516, 0.1183503419072274, 0.2816496580927726, 0.3333333333333333, 0.25, 0.3076923076923077, 0.6512820512820513, 0.6, 0.8571428571428571, 1.0];
#[rustfmt::skip]
const A: [[f64; 12]; 12] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0],
    [0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0],
    [-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0],
    [2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0],
];
const B: [f64; 12] = [0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259];
const E3: [f64; 12] = [-0.18980075407240762, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, -0.4226823213237919, -0.1521609496625161, 0.20136540080403034, 0.02265179219836082];
const E5: [f64; 12] = [0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_ORDER: f64 = 7.0;

/// What the step observer wants done with an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    /// The observer rewrote the state (e.g. renormalized a frame).
    Modified,
    /// Discard the step and try again with half the step size.
    Retry,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub first_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dop853 {
    fn default() -> Self {
        Dop853 { rtol: 1e-10, atol: 1e-12, max_step: f64::INFINITY, first_step: None, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution<T: Scalar> {
    pub t: f64,
    pub y: DMatrix<T>,
    pub steps: usize,
    pub rejected: usize,
    pub stopped: bool,
}

fn rms<T: Scalar>(m: &DMatrix<T>, scale: &DMatrix<f64>) -> f64 {
    let s: f64 = m.iter().zip(scale.iter()).map(|(x, s)| (x.modulus() / s).powi(2)).sum();
    (s / m.len().max(1) as f64).sqrt()
}

impl Dop853 {
    pub fn with_tol(tol: f64) -> Self {
        Dop853 { rtol: tol, atol: tol * 1e-2, ..Default::default() }
    }

    fn initial_step<T, F>(&self, f: &F, t0: f64, y0: &DMatrix<T>, f0: &DMatrix<T>, dir: f64, span: f64) -> f64
    where
        T: Scalar,
        F: Fn(f64, &DMatrix<T>) -> DMatrix<T>,
    {
        let scale = y0.map(|x| self.atol + x.modulus() * self.rtol);
        let d0 = rms(y0, &scale);
        let d1 = rms(f0, &scale);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1 = y0 + f0 * T::from_real(h0 * dir);
        let f1 = f(t0 + h0 * dir, &y1);
        let d2 = rms(&(f1 - f0), &scale) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / (ERROR_ORDER + 1.0))
        };
        (100.0 * h0).min(h1).min(span).min(self.max_step)
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction). The
    /// observer sees every accepted step and may modify the state.
    pub fn integrate<T, F, O>(&self, f: F, t0: f64, y0: DMatrix<T>, t1: f64, mut observer: O) -> Result<OdeSolution<T>>
    where
        T: Scalar,
        F: Fn(f64, &DMatrix<T>) -> DMatrix<T>,
        O: FnMut(f64, &mut DMatrix<T>) -> StepAction,
    {
        let mut sol = OdeSolution { t: t0, y: y0, steps: 0, rejected: 0, stopped: false };
        if t1 == t0 {
            return Ok(sol);
        }
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::InvalidArgument("integration bounds must be finite".into()));
        }
        let dir = (t1 - t0).signum();
        let mut fy = f(t0, &sol.y);
        let mut h = match self.first_step {
            Some(h) => h.abs().min((t1 - t0).abs()),
            None => self.initial_step(&f, t0, &sol.y, &fy, dir, (t1 - t0).abs()),
        };
        let mut k: Vec<DMatrix<T>> = Vec::with_capacity(STAGES);
        loop {
            if sol.steps + sol.rejected >= self.max_steps {
                return Err(Error::Stiffness { t_reached: sol.t });
            }
            let t = sol.t;
            let min_step = 10.0 * (f64::EPSILON * t.abs()).max(f64::MIN_POSITIVE);
            h = h.min(self.max_step);
            if h < min_step {
                return Err(Error::Stiffness { t_reached: t });
            }
            let mut t_new = t + dir * h;
            if dir * (t_new - t1) >= 0.0 {
                t_new = t1;
            }
            let hs = t_new - t;
            let ha = hs.abs();

            k.clear();
            k.push(fy.clone());
            for s in 1..STAGES {
                let mut ys = sol.y.clone();
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        ys.zip_apply(kj, |y, kv| *y += kv * T::from_real(hs * a));
                    }
                }
                k.push(f(t + C[s] * hs, &ys));
            }
            let mut y_new = sol.y.clone();
            let mut e3 = DMatrix::<T>::zeros(y_new.nrows(), y_new.ncols());
            let mut e5 = e3.clone();
            for s in 0..STAGES {
                if B[s] != 0.0 {
                    y_new.zip_apply(&k[s], |y, kv| *y += kv * T::from_real(hs * B[s]));
                }
                if E3[s] != 0.0 {
                    e3.zip_apply(&k[s], |y, kv| *y += kv * T::from_real(E3[s]));
                }
                if E5[s] != 0.0 {
                    e5.zip_apply(&k[s], |y, kv| *y += kv * T::from_real(E5[s]));
                }
            }
            if y_new.iter().any(|x| !x.modulus().is_finite()) {
                h *= 0.5;
                sol.rejected += 1;
                continue;
            }
            let scale = sol.y.zip_map(&y_new, |a, b| self.atol + a.modulus().max(b.modulus()) * self.rtol);
            let n5: f64 = e5.iter().zip(scale.iter()).map(|(e, s)| (e.modulus() / s).powi(2)).sum();
            let n3: f64 = e3.iter().zip(scale.iter()).map(|(e, s)| (e.modulus() / s).powi(2)).sum();
            let err = if n5 == 0.0 && n3 == 0.0 {
                0.0
            } else {
                ha * n5 / ((n5 + 0.01 * n3) * scale.len() as f64).sqrt()
            };

            if err < 1.0 {
                match observer(t_new, &mut y_new) {
                    StepAction::Retry => {
                        h = ha * 0.5;
                        continue;
                    }
                    action => {
                        let factor = if err == 0.0 {
                            MAX_FACTOR
                        } else {
                            (SAFETY * err.powf(-1.0 / (ERROR_ORDER + 1.0))).min(MAX_FACTOR)
                        };
                        sol.t = t_new;
                        sol.y = y_new;
                        sol.steps += 1;
                        if action == StepAction::Stop {
                            sol.stopped = true;
                            return Ok(sol);
                        }
                        if t_new == t1 {
                            return Ok(sol);
                        }
                        fy = f(t_new, &sol.y);
                        h = ha * factor;
                    }
                }
            } else {
                sol.rejected += 1;
                h = ha * (SAFETY * err.powf(-1.0 / (ERROR_ORDER + 1.0))).max(MIN_FACTOR);
            }
        }
    }
}
