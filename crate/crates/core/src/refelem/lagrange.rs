//! Nodal Lagrange bases on equispaced lattices.

use crate::Real;

/// Values and derivatives of the `m + 1` Lagrange polynomials on the
/// equispaced nodes `u_k = -1 + 2k/m` of [-1, 1].
pub(crate) fn line_basis<T: Real>(m: usize, u: T, vals: &mut [T], ders: &mut [T]) {
    debug_assert_eq!(vals.len(), m + 1);
    let node = |k: usize| -T::one() + T::from_count(2 * k) / T::from_count(m);
    for i in 0..=m {
        let ui = node(i);
        let mut v = T::one();
        let mut d = T::zero();
        for k in 0..=m {
            if k == i {
                continue;
            }
            let denom = ui - node(k);
            // product rule, accumulated left to right
            d = d * (u - node(k)) / denom + v / denom;
            v = v * (u - node(k)) / denom;
        }
        vals[i] = v;
        ders[i] = d;
    }
}

/// Silvester's factor `P_p(λ) = Π_{q<p} (mλ - q)/(q + 1)` and its derivative.
#[inline]
fn silvester<T: Real>(m: usize, p: usize, lambda: T) -> (T, T) {
    let ml = T::from_count(m) * lambda;
    let mut v = T::one();
    let mut d = T::zero();
    for q in 0..p {
        let qq = T::from_count(q);
        let den = T::from_count(q + 1);
        d = d * (ml - qq) / den + v * T::from_count(m) / den;
        v = v * (ml - qq) / den;
    }
    (v, d)
}

/// Triangle basis on the principal lattice of the unit triangle. Node `(i, j)`
/// sits at `(i/m, j/m)`; `lattice` lists the `(i, j)` pairs in node order.
pub(crate) fn triangle_basis<T: Real>(
    m: usize,
    lattice: &[(usize, usize)],
    r: T,
    s: T,
    vals: &mut [T],
    grads: &mut [[T; 2]],
) {
    let l0 = T::one() - r - s;
    for (n, &(i, j)) in lattice.iter().enumerate() {
        let k = m - i - j;
        let (p0, d0) = silvester(m, k, l0);
        let (p1, d1) = silvester(m, i, r);
        let (p2, d2) = silvester(m, j, s);
        vals[n] = p0 * p1 * p2;
        grads[n] = [p0 * d1 * p2 - d0 * p1 * p2, p0 * p1 * d2 - d0 * p1 * p2];
    }
}
