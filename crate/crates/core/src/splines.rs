//! Univariate B-spline machinery: knot vectors, basis evaluation with
//! derivatives, Greville abscissae and derivative spaces.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Knot vector together with the polynomial degree of the basis it defines.
///
/// Knots are stored once at construction and never re-derived, so knot
/// equality checks are exact binary comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector<T> {
    degree: usize,
    knots: Vec<T>,
}

/// The `degree + 1` possibly-nonzero basis functions at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval<T> {
    /// Index `i` of the knot span `[ξ_i, ξ_{i+1})` containing the point.
    pub span_index: usize,
    /// Global index of the basis function stored at position 0.
    pub first_basis: usize,
    pub values: Vec<T>,
    /// Empty unless at least one derivative was requested.
    pub first_derivs: Vec<T>,
    /// Empty unless two derivatives were requested.
    pub second_derivs: Vec<T>,
}

impl<T: Real> BasisEval<T> {
    /// Derivative of order `order` (0, 1 or 2) of local function `local`.
    #[inline]
    pub fn deriv(&self, order: usize, local: usize) -> T {
        match order {
            0 => self.values[local],
            1 => self.first_derivs.get(local).copied().unwrap_or_else(T::zero),
            2 => self.second_derivs.get(local).copied().unwrap_or_else(T::zero),
            _ => T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T: Real> KnotVector<T> {
    /// Builds a knot vector from an explicit knot sequence.
    pub fn new(degree: usize, knots: Vec<T>) -> Result<Self> {
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::InvalidInput(format!(
                "degree {degree} needs at least {} knots, got {}",
                2 * (degree + 1),
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidInput("knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("knots must be non-decreasing".into()));
        }
        let kv = Self { degree, knots };
        let n = kv.num_basis();
        // interior multiplicity at most `degree` (piecewise constants allow 1)
        let mut i = 1;
        while i < n {
            let mult = kv.multiplicity_at(i);
            if kv.knots[i] > kv.knots[0] && kv.knots[i] < kv.knots[kv.knots.len() - 1] && mult > degree.max(1) {
                return Err(Error::InvalidInput(format!(
                    "interior knot multiplicity {mult} exceeds degree {degree}"
                )));
            }
            i += mult.max(1);
        }
        if kv.knots[degree] >= kv.knots[n] {
            return Err(Error::InvalidInput("knot vector has an empty parametric domain".into()));
        }
        Ok(kv)
    }

    /// Open knot vector: end breakpoints repeated `degree + 1` times, interior
    /// breakpoints once.
    pub fn open(degree: usize, breakpoints: &[T]) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidInput("at least two breakpoints are required".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
        }
        let first = breakpoints[0];
        let last = breakpoints[breakpoints.len() - 1];
        let mut knots = Vec::with_capacity(breakpoints.len() + 2 * degree);
        knots.extend(std::iter::repeat(first).take(degree + 1));
        knots.extend_from_slice(&breakpoints[1..breakpoints.len() - 1]);
        knots.extend(std::iter::repeat(last).take(degree + 1));
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of basis functions `n = len(knots) - degree - 1`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Parametric domain `[ξ_{k+1}, ξ_{n+1}]`.
    pub fn domain(&self) -> (T, T) {
        (self.knots[self.degree], self.knots[self.num_basis()])
    }

    /// True when both end knots appear exactly `degree + 1` times.
    pub fn is_open(&self) -> bool {
        let m = self.knots.len();
        let k = self.degree;
        self.knots[..=k].iter().all(|&x| x == self.knots[0])
            && self.knots[m - k - 1..].iter().all(|&x| x == self.knots[m - 1])
            && self.knots[k + 1] > self.knots[0]
            && self.knots[m - k - 2] < self.knots[m - 1]
    }

    fn multiplicity_at(&self, i: usize) -> usize {
        self.knots.iter().filter(|&&x| x == self.knots[i]).count()
    }

    /// Distinct knot values in increasing order.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut out: Vec<T> = Vec::new();
        for &k in &self.knots {
            if out.last().map_or(true, |&l| k > l) {
                out.push(k);
            }
        }
        out
    }

    /// Regularity `α_j = degree - multiplicity` of each distinct knot.
    pub fn regularity(&self) -> Vec<isize> {
        self.breakpoints()
            .iter()
            .map(|b| self.degree as isize - self.knots.iter().filter(|&&x| x == *b).count() as isize)
            .collect()
    }

    /// Span index `i` with `ξ_i <= x < ξ_{i+1}`; the right domain end maps to
    /// the last nonempty span.
    pub fn find_span(&self, x: T) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfDomain {
                value: x.to_f64_lossy(),
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        let n = self.num_basis();
        let mut span = if x >= hi {
            n - 1
        } else {
            // largest i in [k, n-1] with knots[i] <= x
            let (mut a, mut b) = (self.degree, n);
            while b - a > 1 {
                let mid = (a + b) / 2;
                if self.knots[mid] <= x {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a
        };
        while self.knots[span] == self.knots[span + 1] {
            span -= 1;
        }
        Ok(span)
    }

    /// Basis values and up to `max_deriv` derivatives at `x`.
    pub fn eval_basis(&self, x: T, max_deriv: usize) -> Result<BasisEval<T>> {
        if max_deriv > 2 {
            return Err(Error::InvalidInput(format!("max_deriv {max_deriv} > 2")));
        }
        let span = self.find_span(x)?;
        let ders = ders_basis_funs(&self.knots, self.degree, span, x, max_deriv);
        let mut it = ders.into_iter();
        let values = it.next().unwrap_or_default();
        let first_derivs = it.next().unwrap_or_default();
        let second_derivs = it.next().unwrap_or_default();
        Ok(BasisEval {
            span_index: span,
            first_basis: span - self.degree,
            values,
            first_derivs,
            second_derivs,
        })
    }

    /// Greville abscissae `ξ̂_i = (ξ_{i+1} + … + ξ_{i+k}) / k`.
    pub fn greville(&self) -> Result<Vec<T>> {
        let k = self.degree;
        if k == 0 {
            return Err(Error::UnsupportedDegree {
                degree: 0,
                reason: "Greville abscissae need degree >= 1".into(),
            });
        }
        let kk = T::of(k);
        Ok((0..self.num_basis())
            .map(|i| {
                let s = self.knots[i + 1..=i + k].iter().fold(T::zero(), |acc, &v| acc + v);
                s / kk
            })
            .collect())
    }

    /// Knot vector of degree `k - 1` spanning the derivatives of this space.
    pub fn derivative_space(&self) -> Result<Self> {
        if self.degree == 0 {
            return Err(Error::InvalidInput("cannot differentiate a degree-0 space".into()));
        }
        Self::new(self.degree - 1, self.knots[1..self.knots.len() - 1].to_vec())
    }

    /// Coefficients, in [`Self::derivative_space`], of the derivative of the
    /// spline with coefficients `coeffs`.
    pub fn differentiate_coeffs(&self, coeffs: &[T]) -> Result<Vec<T>> {
        crate::error::check_len(self.num_basis(), coeffs.len())?;
        Ok(self.derivative_weights().into_iter().enumerate().map(|(j, w)| w * (coeffs[j + 1] - coeffs[j])).collect())
    }

    /// Factors `k / (ξ_{j+k+1} - ξ_{j+1})` of the coefficient differencing.
    pub fn derivative_weights(&self) -> Vec<T> {
        let k = self.degree;
        let kk = T::of(k);
        (0..self.num_basis() - 1)
            .map(|j| kk / (self.knots[j + k + 1] - self.knots[j + 1]))
            .collect()
    }

    /// Exact integrals `(ξ_{i+k+1} - ξ_i) / (k + 1)` of each basis function.
    pub fn basis_integrals(&self) -> Vec<T> {
        let k = self.degree;
        let kp1 = T::of(k + 1);
        (0..self.num_basis()).map(|i| (self.knots[i + k + 1] - self.knots[i]) / kp1).collect()
    }

    /// Evaluates the spline with coefficients `coeffs` (value only).
    pub fn eval_spline(&self, coeffs: &[T], x: T) -> Result<T> {
        crate::error::check_len(self.num_basis(), coeffs.len())?;
        let b = self.eval_basis(x, 0)?;
        Ok(b.values.iter().enumerate().fold(T::zero(), |acc, (l, &v)| acc + v * coeffs[b.first_basis + l]))
    }
}

/// Builds an open knot vector; see [`KnotVector::open`].
pub fn make_open_knot_vector<T: Real>(degree: usize, breakpoints: &[T]) -> Result<KnotVector<T>> {
    KnotVector::open(degree, breakpoints)
}

/// `num_elements + 1` uniformly spaced breakpoints on `[0, 1]`.
pub fn uniform_breakpoints<T: Real>(num_elements: usize) -> Result<Vec<T>> {
    if num_elements < 1 {
        return Err(Error::InvalidInput("need at least one element".into()));
    }
    let n = T::of(num_elements);
    Ok((0..=num_elements).map(|i| T::of(i) / n).collect())
}

/// tanh-stretched breakpoints on `[0, 1]` clustering toward both ends:
/// `ξ_i = ½ (1 + tanh(4 i h − 2) / tanh 2)` with `h = 1 / num_elements`.
///
/// The upper half is mirrored from the lower half so that
/// `ξ_i + ξ_{N−i} = 1` holds exactly.
pub fn stretched_breakpoints<T: Real>(num_elements: usize) -> Result<Vec<T>> {
    if num_elements < 2 {
        return Err(Error::InvalidInput("stretched meshes need at least two elements".into()));
    }
    let n = num_elements;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let raw = |i: usize| half * (T::one() + (four * T::of(i) / T::of(n) - two).tanh() / two.tanh());
    let mut out = vec![T::zero(); n + 1];
    out[n] = T::one();
    for i in 1..n {
        out[i] = if 2 * i < n {
            raw(i)
        } else if 2 * i == n {
            half
        } else {
            T::one() - raw(n - i)
        };
    }
    Ok(out)
}

/// Basis functions and derivatives on a nonempty span (The NURBS Book, A2.3).
fn ders_basis_funs<T: Real>(knots: &[T], p: usize, span: usize, x: T, n: usize) -> Vec<Vec<T>> {
    let mut ndu = vec![vec![T::zero(); p + 1]; p + 1];
    let mut left = vec![T::zero(); p + 1];
    let mut right = vec![T::zero(); p + 1];
    ndu[0][0] = T::one();
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = T::zero();
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![T::zero(); p + 1]; n + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    if n == 0 {
        return ders;
    }
    let mut a = vec![vec![T::zero(); p + 1]; 2];
    let pi = p as isize;
    for r in 0..=pi {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = T::one();
        for k in 1..=(n as isize) {
            let mut d = T::zero();
            let rk = r - k;
            let pk = pi - k;
            if k > pi {
                // derivatives above the degree vanish
                ders[k as usize][r as usize] = T::zero();
                std::mem::swap(&mut s1, &mut s2);
                continue;
            }
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk as usize];
            }
            let j1 = if rk >= -1 { 1 } else { -rk };
            let j2 = if r - 1 <= pk { k - 1 } else { pi - r };
            let mut j = j1;
            while j <= j2 {
                let ju = j as usize;
                a[s2][ju] = (a[s1][ju] - a[s1][ju - 1]) / ndu[(pk + 1) as usize][(rk + j) as usize];
                d = d + a[s2][ju] * ndu[(rk + j) as usize][pk as usize];
                j += 1;
            }
            if r <= pk {
                a[s2][k as usize] = -a[s1][(k - 1) as usize] / ndu[(pk + 1) as usize][r as usize];
                d = d + a[s2][k as usize] * ndu[r as usize][pk as usize];
            }
            ders[k as usize][r as usize] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = T::of(p);
    for k in 1..=n {
        for v in ders[k].iter_mut() {
            *v = *v * fac;
        }
        fac = fac * T::of(p.saturating_sub(k));
    }
    ders
}
