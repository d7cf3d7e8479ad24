//! Uniform radial grid with a conservative (finite-volume) Laplacian.
//!
//! Node `i` sits at `r_i = i h` and owns the shell `[r_i - h/2, r_i + h/2]`
//! (`[0, h/2]` at the origin). Fluxes through the shell faces give
//!
//! `(L u)_i = [A_{i+1/2} (u_{i+1} - u_i) - A_{i-1/2} (u_i - u_{i-1})] / (h V_i)`
//!
//! with `A = r^{N-1}` and `V_i` the shell volume divided by `|S^{N-1}|`. This
//! is second order in the interior, reduces to `N u_rr` (with `u_r(0) = 0`)
//! at the origin, and is symmetric in the `V`-weighted inner product, which
//! is what makes the leapfrog energy exactly monotone.

use crate::specfun::sphere_area;

#[derive(Debug, Clone)]
pub struct RadialGrid {
    dimension: u32,
    h: f64,
    radii: Vec<f64>,
    volumes: Vec<f64>,
    /// `A_{i+1/2} / h` for `i = 0..nr`.
    faces: Vec<f64>,
    stable_dt: f64,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `((r + h/2)^N - (r - h/2)^N) / N` without cancellation at large `r`.
fn shell_volume(n: u32, r: f64, h: f64) -> f64 {
    let half = 0.5 * h;
    let mut acc = 0.0;
    let mut k = 1;
    while k <= n {
        acc += binomial(n, k) * r.powi((n - k) as i32) * half.powi(k as i32);
        k += 2;
    }
    2.0 * acc / n as f64
}

impl RadialGrid {
    /// `nr` cells on `[0, length]`; node `nr` carries the Dirichlet condition.
    pub fn new(dimension: u32, length: f64, nr: usize) -> Self {
        let h = length / nr as f64;
        let radii: Vec<f64> = (0..=nr).map(|i| i as f64 * h).collect();
        let k = dimension as i32 - 1;
        let volumes: Vec<f64> = (0..nr)
            .map(|i| {
                if i == 0 {
                    (0.5 * h).powi(dimension as i32) / dimension as f64
                } else {
                    shell_volume(dimension, radii[i], h)
                }
            })
            .collect();
        let faces: Vec<f64> = (0..nr)
            .map(|i| ((i as f64 + 0.5) * h).powi(k) / h)
            .collect();

        // Gershgorin bound on the symmetrized operator V^{1/2} (-L) V^{-1/2}.
        let mut lambda_max: f64 = 0.0;
        for i in 0..nr {
            let mut row = faces[i] / volumes[i];
            if i + 1 < nr {
                row += faces[i] / (volumes[i] * volumes[i + 1]).sqrt();
            }
            if i > 0 {
                row += faces[i - 1] / volumes[i];
                row += faces[i - 1] / (volumes[i] * volumes[i - 1]).sqrt();
            }
            lambda_max = lambda_max.max(row);
        }
        let stable_dt = 2.0 / lambda_max.sqrt();

        Self {
            dimension,
            h,
            radii,
            volumes,
            faces,
            stable_dt,
        }
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of cells (the last node index).
    pub fn nr(&self) -> usize {
        self.faces.len()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Largest leapfrog step for the undamped linear scheme on this grid.
    pub fn stable_dt(&self) -> f64 {
        self.stable_dt
    }

    /// `(L u)_i`. `u` holds nodes `0..=nr` (or fewer, with zeros implied).
    #[inline]
    pub fn laplacian_at(&self, u: &[f64], i: usize) -> f64 {
        let ui = u[i];
        let right = if i + 1 < u.len() { u[i + 1] } else { 0.0 };
        let mut flux = self.faces[i] * (right - ui);
        if i > 0 {
            flux -= self.faces[i - 1] * (ui - u[i - 1]);
        }
        flux / self.volumes[i]
    }

    /// Leapfrog energy between two consecutive levels (`|S^{N-1}|` included):
    /// `½ Σ V_i ((u1-u0)/dt)^2 + ½ Σ A/h (Δu1)(Δu0)`.
    pub fn staggered_energy(&self, u0: &[f64], u1: &[f64], dt: f64) -> f64 {
        let nr = self.nr();
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        for i in 0..nr {
            let v = (u1[i] - u0[i]) / dt;
            kinetic += self.volumes[i] * v * v;
            let d1 = u1.get(i + 1).copied().unwrap_or(0.0) - u1[i];
            let d0 = u0.get(i + 1).copied().unwrap_or(0.0) - u0[i];
            potential += self.faces[i] * d1 * d0;
        }
        0.5 * sphere_area(self.dimension - 1) * (kinetic + potential)
    }

    /// Trapezoid weights `|S^{N-1}| r_i^{N-1} h` (halved at both ends) on nodes `0..=nr`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let area = sphere_area(self.dimension - 1);
        let k = self.dimension as i32 - 1;
        let last = self.radii.len() - 1;
        self.radii
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let end = if i == 0 || i == last { 0.5 } else { 1.0 };
                end * area * r.powi(k) * self.h
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_volumes_sum_to_ball() {
        for n in 1..=4u32 {
            let grid = RadialGrid::new(n, 10.0, 200);
            let total: f64 = grid.volumes().iter().sum();
            // Shells tile [0, L - h/2].
            let outer = 10.0 - 0.5 * grid.h();
            let exact = outer.powi(n as i32) / n as f64;
            assert!((total / exact - 1.0).abs() < 1e-12, "N={n}");
        }
    }

    #[test]
    fn origin_row_is_regularized_laplacian() {
        let grid = RadialGrid::new(3, 1.0, 100);
        let u: Vec<f64> = grid.radii().iter().map(|r| 1.0 - r * r).collect();
        // N u_rr = 3 * (-2)
        assert!((grid.laplacian_at(&u, 0) + 6.0).abs() < 1e-9);
        // Interior: Δ(1 - r^2) = -2N exactly for this quadratic.
        for i in [1, 5, 50] {
            let l = grid.laplacian_at(&u, i);
            assert!((l + 6.0).abs() < 1e-9, "i={i}: {l}");
        }
    }

    #[test]
    fn laplacian_is_second_order() {
        // u = cos(r), Δu = -cos r - (N-1) sin(r)/r.
        let errs: Vec<f64> = [100usize, 200, 400]
            .iter()
            .map(|&nr| {
                let grid = RadialGrid::new(2, 2.0, nr);
                let u: Vec<f64> = grid.radii().iter().map(|r| r.cos()).collect();
                let mut e: f64 = 0.0;
                for i in 1..nr - 1 {
                    let r = grid.radii()[i];
                    let exact = -r.cos() - r.sin() / r;
                    e = e.max((grid.laplacian_at(&u, i) - exact).abs());
                }
                e
            })
            .collect();
        let order = (errs[1] / errs[2]).log2();
        assert!((order - 2.0).abs() < 0.2, "{errs:?} order {order}");
    }

    #[test]
    fn stable_step_matches_known_limits() {
        // Ratios of the Gershgorin bound to h (independent of h).
        let ratios: Vec<f64> = (1..=3u32)
            .map(|n| {
                let g = RadialGrid::new(n, 100.0, 400);
                g.stable_dt() / g.h()
            })
            .collect();
        assert!((ratios[0] - 0.9519).abs() < 1e-3, "{ratios:?}");
        assert!((ratios[2] - 0.7466).abs() < 1e-3, "{ratios:?}");
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    }
}
