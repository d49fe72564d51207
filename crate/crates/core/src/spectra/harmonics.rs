//! Real spherical harmonics normalized for the unit-mass measure on S².
//!
//! `Y_l^m = N_l^m Q_l^m(z) Re (x + iy)^m` (and `Im` for negative `m`), where
//! `Q_l^m` is the `m`-th derivative of the Legendre polynomial `P_l`. The
//! formula is a polynomial in the ambient coordinates, so its ambient gradient
//! projected to the tangent plane is the Riemannian gradient.

/// Table of `Q_l^m(z)` for `0 ≤ m ≤ l ≤ lmax + 1`.
pub(crate) struct LegendreTable {
    lmax: usize,
    q: Vec<f64>,
}

impl LegendreTable {
    pub fn new(lmax: usize, z: f64) -> Self {
        let size = lmax + 2;
        let mut q = vec![0.0; size * size];
        for m in 0..size {
            // Q_m^m = (2m - 1)!!
            let mut qmm = 1.0;
            for j in 0..m {
                qmm *= (2 * j + 1) as f64;
            }
            q[m * size + m] = qmm;
            if m + 1 < size {
                q[(m + 1) * size + m] = (2 * m + 1) as f64 * z * qmm;
            }
            for l in (m + 2)..size {
                let a = (2 * l - 1) as f64 * z * q[(l - 1) * size + m];
                let b = (l + m - 1) as f64 * q[(l - 2) * size + m];
                q[l * size + m] = (a - b) / (l - m) as f64;
            }
        }
        LegendreTable { lmax: size - 1, q }
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize) -> f64 {
        if m > l || l > self.lmax {
            0.0
        } else {
            self.q[l * (self.lmax + 1) + m]
        }
    }
}

/// `sqrt((2l+1)(l-m)!/(l+m)!)`, times `√2` when `m ≠ 0`.
pub(crate) fn normalization(l: usize, m: usize) -> f64 {
    let mut ratio = 1.0f64;
    for j in (l - m + 1)..=(l + m) {
        ratio /= j as f64;
    }
    let base = ((2 * l + 1) as f64 * ratio).sqrt();
    if m == 0 {
        base
    } else {
        base * std::f64::consts::SQRT_2
    }
}

/// Powers `(x + iy)^m` for `0 ≤ m ≤ mmax` as (re, im).
pub(crate) fn complex_powers(x: f64, y: f64, mmax: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(mmax + 1);
    let (mut re, mut im) = (1.0, 0.0);
    out.push((re, im));
    for _ in 0..mmax {
        let nr = re * x - im * y;
        let ni = re * y + im * x;
        re = nr;
        im = ni;
        out.push((re, im));
    }
    out
}

/// Value and ambient gradient of the real harmonic `(l, m)`; negative `m` selects `Im`.
pub(crate) fn real_harmonic(
    l: usize,
    m: i64,
    norm: f64,
    table: &LegendreTable,
    pow: &[(f64, f64)],
) -> (f64, [f64; 3]) {
    let ma = m.unsigned_abs() as usize;
    let q = table.get(l, ma);
    let dq = table.get(l, ma + 1);
    let (re, im) = pow[ma];
    let (pre, pim) = if ma == 0 { (0.0, 0.0) } else { pow[ma - 1] };
    let mf = ma as f64;
    if m >= 0 {
        let v = norm * q * re;
        let g = [norm * q * mf * pre, -norm * q * mf * pim, norm * dq * re];
        (v, g)
    } else {
        let v = norm * q * im;
        let g = [norm * q * mf * pim, norm * q * mf * pre, norm * dq * im];
        (v, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_closed_forms() {
        let z = 0.3;
        let t = LegendreTable::new(3, z);
        assert_eq!(t.get(0, 0), 1.0);
        assert!((t.get(1, 0) - z).abs() < 1e-15);
        assert!((t.get(2, 0) - 0.5 * (3.0 * z * z - 1.0)).abs() < 1e-15);
        assert!((t.get(2, 1) - 3.0 * z).abs() < 1e-15);
        assert!((t.get(2, 2) - 3.0).abs() < 1e-15);
        assert!((t.get(3, 0) - 0.5 * (5.0 * z.powi(3) - 3.0 * z)).abs() < 1e-15);
        // derivative table consistency: Q_3^1 = P_3'
        assert!((t.get(3, 1) - 0.5 * (15.0 * z * z - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn y10_is_sqrt3_z() {
        let t = LegendreTable::new(1, 0.4);
        let pow = complex_powers(0.5, 0.2, 1);
        let (v, g) = real_harmonic(1, 0, normalization(1, 0), &t, &pow);
        assert!((v - 3f64.sqrt() * 0.4).abs() < 1e-15);
        assert!((g[2] - 3f64.sqrt()).abs() < 1e-15 && g[0] == 0.0 && g[1] == 0.0);
    }
}
