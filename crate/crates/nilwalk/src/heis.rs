//! Heisenberg group arithmetic and word-product functionals.
//!
//! Elements are written `[x, y, z]` for the upper-triangular matrix with
//! first row `(1, x, z)` and second row `(0, 1, y)`. The lattice variant uses
//! checked 128-bit integers (overflow is an error, never a wraparound), the
//! continuum variant uses `f64`.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum HeisError {
    /// 128-bit integer range exceeded in a coordinate computation.
    #[error("arithmetic overflow in Heisenberg coordinate computation")]
    Overflow,
}

/// Scalar coordinate type: checked integers or plain doubles.
pub trait HeisScalar: Copy + PartialEq + std::fmt::Debug {
    const ZERO: Self;
    fn add(self, o: Self) -> Result<Self, HeisError>;
    fn sub(self, o: Self) -> Result<Self, HeisError>;
    fn mul(self, o: Self) -> Result<Self, HeisError>;
    fn neg(self) -> Result<Self, HeisError>;
}

impl HeisScalar for i128 {
    const ZERO: Self = 0;
    fn add(self, o: Self) -> Result<Self, HeisError> {
        self.checked_add(o).ok_or(HeisError::Overflow)
    }
    fn sub(self, o: Self) -> Result<Self, HeisError> {
        self.checked_sub(o).ok_or(HeisError::Overflow)
    }
    fn mul(self, o: Self) -> Result<Self, HeisError> {
        self.checked_mul(o).ok_or(HeisError::Overflow)
    }
    fn neg(self) -> Result<Self, HeisError> {
        self.checked_neg().ok_or(HeisError::Overflow)
    }
}

impl HeisScalar for f64 {
    const ZERO: Self = 0.0;
    fn add(self, o: Self) -> Result<Self, HeisError> {
        Ok(self + o)
    }
    fn sub(self, o: Self) -> Result<Self, HeisError> {
        Ok(self - o)
    }
    fn mul(self, o: Self) -> Result<Self, HeisError> {
        Ok(self * o)
    }
    fn neg(self) -> Result<Self, HeisError> {
        Ok(-self)
    }
}

/// Group element `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeisElem<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

/// Lattice element of `H(Z)`.
pub type HeisZ = HeisElem<i128>;
/// Continuum element of `H(R)`.
pub type HeisR = HeisElem<f64>;

impl<T: HeisScalar> HeisElem<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::ZERO, T::ZERO, T::ZERO)
    }

    pub fn is_identity(&self) -> bool {
        self.x == T::ZERO && self.y == T::ZERO && self.z == T::ZERO
    }

    /// Group law: `[x,y,z]·[x',y',z'] = [x+x', y+y', z+z'+x·y']`.
    pub fn mul(&self, o: &Self) -> Result<Self, HeisError> {
        Ok(Self::new(
            self.x.add(o.x)?,
            self.y.add(o.y)?,
            self.z.add(o.z)?.add(self.x.mul(o.y)?)?,
        ))
    }

    /// `[x,y,z]^{-1} = [-x, -y, xy - z]`.
    pub fn inverse(&self) -> Result<Self, HeisError> {
        Ok(Self::new(
            self.x.neg()?,
            self.y.neg()?,
            self.x.mul(self.y)?.sub(self.z)?,
        ))
    }

    /// Abelianized coordinates `(x, y)`.
    pub fn ab(&self) -> [T; 2] {
        [self.x, self.y]
    }
}

impl HeisZ {
    /// Centered central coordinate doubled: `2·z̃ = 2z - xy`, always an integer.
    pub fn zt2(&self) -> Result<i128, HeisError> {
        2i128
            .checked_mul(self.z)
            .and_then(|v| v.checked_sub(self.x.wrapping_mul(self.y)))
            .ok_or(HeisError::Overflow)
    }
}

impl HeisR {
    /// Centered central coordinate `z̃ = z - xy/2`.
    pub fn zt(&self) -> f64 {
        self.z - 0.5 * self.x * self.y
    }
}

/// Left-to-right product of a word of group elements; empty word is the identity.
pub fn word_product<T: HeisScalar>(word: &[HeisElem<T>]) -> Result<HeisElem<T>, HeisError> {
    let mut acc = HeisElem::identity();
    for w in word {
        acc = acc.mul(w)?;
    }
    Ok(acc)
}

/// `H(w) = sum_{i<j} w_i^(1) w_j^(2)` over a word of abelianized 2-vectors.
///
/// Evaluated with prefix sums in O(N).
pub fn h_functional<T: HeisScalar>(word_ab: &[[T; 2]]) -> Result<T, HeisError> {
    let mut acc = T::ZERO;
    let mut prefix_x = T::ZERO;
    for w in word_ab {
        acc = acc.add(prefix_x.mul(w[1])?)?;
        prefix_x = prefix_x.add(w[0])?;
    }
    Ok(acc)
}

/// `2·H*(w) = sum_{i<j} (w_i^(1) w_j^(2) - w_i^(2) w_j^(1))`, exact integers.
///
/// The doubling keeps the antisymmetric form integral on lattice words.
pub fn h_star_double(word_ab: &[[i128; 2]]) -> Result<i128, HeisError> {
    let mut acc: i128 = 0;
    let mut px: i128 = 0;
    let mut py: i128 = 0;
    for w in word_ab {
        let t = px
            .checked_mul(w[1])
            .and_then(|a| py.checked_mul(w[0]).map(|b| (a, b)))
            .and_then(|(a, b)| a.checked_sub(b))
            .ok_or(HeisError::Overflow)?;
        acc = acc.checked_add(t).ok_or(HeisError::Overflow)?;
        px = px.checked_add(w[0]).ok_or(HeisError::Overflow)?;
        py = py.checked_add(w[1]).ok_or(HeisError::Overflow)?;
    }
    Ok(acc)
}

/// `H*(w) = (1/2) sum_{i<j} (w_i^(1) w_j^(2) - w_i^(2) w_j^(1))` for real words.
pub fn h_star(word_ab: &[[f64; 2]]) -> f64 {
    let mut acc = 0.0;
    let mut px = 0.0;
    let mut py = 0.0;
    for w in word_ab {
        acc += px * w[1] - py * w[0];
        px += w[0];
        py += w[1];
    }
    0.5 * acc
}

/// Product of a lattice word through the centered decomposition
/// `prod w_i = sum w̃_i + [0, 0, (1/2) w̄^(1) w̄^(2) + H*(w)]`.
///
/// Must agree with [`word_product`] exactly; all intermediates are kept as
/// doubled integers so nothing leaves `Z`.
pub fn product_formula(word: &[HeisZ]) -> Result<HeisZ, HeisError> {
    let mut sx: i128 = 0;
    let mut sy: i128 = 0;
    // running sum of 2·w̃^(3) = 2z - xy
    let mut szt2: i128 = 0;
    let mut ab = Vec::with_capacity(word.len());
    for w in word {
        sx = sx.checked_add(w.x).ok_or(HeisError::Overflow)?;
        sy = sy.checked_add(w.y).ok_or(HeisError::Overflow)?;
        szt2 = szt2.checked_add(w.zt2()?).ok_or(HeisError::Overflow)?;
        ab.push([w.x, w.y]);
    }
    let h2 = h_star_double(&ab)?;
    // 2z = 2·sum(w̃^(3)) + w̄^(1)·w̄^(2) + 2H*
    let xy = sx.checked_mul(sy).ok_or(HeisError::Overflow)?;
    let z2 = szt2
        .checked_add(xy)
        .and_then(|v| v.checked_add(h2))
        .ok_or(HeisError::Overflow)?;
    debug_assert!(z2 % 2 == 0, "central coordinate of a lattice word is integral");
    Ok(HeisZ::new(sx, sy, z2 / 2))
}

/// Dilation parameter `t > 0` for `d_t([x,y,z]) = [tx, ty, t^2 z]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dilation {
    t: f64,
}

impl Dilation {
    pub fn new(t: f64) -> Option<Self> {
        (t > 0.0 && t.is_finite()).then_some(Self { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Semigroup composition `d_s ∘ d_t = d_{st}`.
    pub fn compose(&self, o: &Dilation) -> Option<Dilation> {
        Dilation::new(self.t * o.t)
    }

    pub fn apply(&self, g: &HeisR) -> HeisR {
        HeisR::new(self.t * g.x, self.t * g.y, self.t * self.t * g.z)
    }
}

/// Integer dilation of a lattice element (exact, checked).
pub fn dilate_int(t: i128, g: &HeisZ) -> Result<HeisZ, HeisError> {
    Ok(HeisZ::new(
        t.mul(g.x)?,
        t.mul(g.y)?,
        t.mul(t)?.mul(g.z)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    // 3x3 integer matrix oracle: [[1,x,z],[0,1,y],[0,0,1]].
    fn to_mat(g: &HeisZ) -> [[i128; 3]; 3] {
        [[1, g.x, g.z], [0, 1, g.y], [0, 0, 1]]
    }

    fn mat_mul(a: [[i128; 3]; 3], b: [[i128; 3]; 3]) -> [[i128; 3]; 3] {
        let mut c = [[0i128; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    fn from_mat(m: [[i128; 3]; 3]) -> HeisZ {
        HeisZ::new(m[0][1], m[1][2], m[0][2])
    }

    const A: HeisZ = HeisZ { x: 1, y: 0, z: 0 };
    const B: HeisZ = HeisZ { x: 0, y: 1, z: 0 };

    #[test]
    fn mul_matches_matrix_oracle() {
        // identity case
        let g = HeisZ::new(3, -2, 7);
        assert_eq!(HeisZ::identity().mul(&g).unwrap(), g);
        // [1,0,0]*[0,1,0] = [1,1,1]
        assert_eq!(A.mul(&B).unwrap(), HeisZ::new(1, 1, 1));
        // random triples against the matrix product
        let mut s = 0x9e3779b97f4a7c15u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as i128 % 2001) - 1000
        };
        for _ in 0..2000 {
            let a = HeisZ::new(rnd(), rnd(), rnd());
            let b = HeisZ::new(rnd(), rnd(), rnd());
            let via_mat = from_mat(mat_mul(to_mat(&a), to_mat(&b)));
            assert_eq!(a.mul(&b).unwrap(), via_mat);
        }
    }

    #[test]
    fn associativity_bulk() {
        // 10^4 random triples with coordinates up to 1e6
        let mut s = 0x5bd1e995u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as i128 % 2_000_001) - 1_000_000
        };
        for _ in 0..10_000 {
            let a = HeisZ::new(rnd(), rnd(), rnd());
            let b = HeisZ::new(rnd(), rnd(), rnd());
            let c = HeisZ::new(rnd(), rnd(), rnd());
            assert_eq!(
                a.mul(&b).unwrap().mul(&c).unwrap(),
                a.mul(&b.mul(&c).unwrap()).unwrap()
            );
        }
    }

    #[test]
    fn commutator_identities() {
        let c = HeisZ::new(0, 0, 1);
        let ai = A.inverse().unwrap();
        let bi = B.inverse().unwrap();
        let comm = |p: &HeisZ, q: &HeisZ| {
            word_product(&[*p, *q, p.inverse().unwrap(), q.inverse().unwrap()]).unwrap()
        };
        assert_eq!(comm(&A, &B), c);
        assert_eq!(comm(&ai, &bi), c);
        assert_eq!(comm(&A, &bi), c.inverse().unwrap());
        assert_eq!(comm(&ai, &B), c.inverse().unwrap());
    }

    #[test]
    fn inverse_matches_matrix_oracle() {
        assert_eq!(HeisZ::identity().inverse().unwrap(), HeisZ::identity());
        assert_eq!(HeisZ::new(1, 1, 1).inverse().unwrap(), HeisZ::new(-1, -1, 0));
        assert_eq!(HeisZ::new(1, 0, 0).inverse().unwrap(), HeisZ::new(-1, 0, 0));
        let g = HeisZ::new(5, -3, 11);
        let gi = g.inverse().unwrap();
        assert!(g.mul(&gi).unwrap().is_identity());
        assert!(gi.mul(&g).unwrap().is_identity());
    }

    #[test]
    fn word_product_examples() {
        assert_eq!(word_product::<i128>(&[]).unwrap(), HeisZ::identity());
        assert_eq!(word_product(&[A]).unwrap(), A);
        assert_eq!(word_product(&[A, B]).unwrap(), HeisZ::new(1, 1, 1));
        assert_eq!(word_product(&[B, A]).unwrap(), HeisZ::new(1, 1, 0));
    }

    #[test]
    fn h_functionals_small_cases() {
        assert_eq!(h_functional::<i128>(&[[7, -2]]).unwrap(), 0);
        assert_eq!(h_functional::<i128>(&[[1, 0], [0, 1]]).unwrap(), 1);
        assert_eq!(h_functional::<i128>(&[[0, 1], [1, 0]]).unwrap(), 0);
        assert_eq!(h_star_double(&[[4, 9]]).unwrap(), 0);
        assert_eq!(h_star_double(&[[1, 0], [0, 1]]).unwrap(), 1); // H* = 1/2
        assert_eq!(h_star_double(&[[1, 0], [1, 0]]).unwrap(), 0);
        // brute-force double sum oracle on a random word
        let w: Vec<[i128; 2]> = vec![[2, -1], [0, 3], [-4, 1], [5, 5], [1, -2]];
        let mut h = 0i128;
        let mut h2 = 0i128;
        for i in 0..w.len() {
            for j in i + 1..w.len() {
                h += w[i][0] * w[j][1];
                h2 += w[i][0] * w[j][1] - w[i][1] * w[j][0];
            }
        }
        assert_eq!(h_functional(&w).unwrap(), h);
        assert_eq!(h_star_double(&w).unwrap(), h2);
    }

    #[test]
    fn product_formula_equals_fold() {
        assert_eq!(product_formula(&[A, B]).unwrap(), HeisZ::new(1, 1, 1));
        assert_eq!(product_formula(&[]).unwrap(), HeisZ::identity());
        // 1000 random letters from the mu0 alphabet
        let alphabet = [
            HeisZ::identity(),
            A,
            A.inverse().unwrap(),
            B,
            B.inverse().unwrap(),
        ];
        let mut s = 0xdeadbeefu64;
        let word: Vec<HeisZ> = (0..1000)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                alphabet[(s >> 40) as usize % 5]
            })
            .collect();
        assert_eq!(product_formula(&word).unwrap(), word_product(&word).unwrap());
    }

    #[test]
    fn h_star_sign_flip_on_adjacent_swap() {
        // two-letter word with distinct abelianizations: swap flips the sign
        let w = [[3i128, 1], [1, 2]];
        let swapped = [[1i128, 2], [3, 1]];
        assert_eq!(h_star_double(&w).unwrap(), -h_star_double(&swapped).unwrap());
    }

    #[test]
    fn dilation_semigroup_and_automorphism() {
        let g = HeisR::new(1.0, 1.0, 1.0);
        let d1 = Dilation::new(1.0).unwrap();
        assert_eq!(d1.apply(&g), g);
        let d2 = Dilation::new(2.0).unwrap();
        assert_eq!(d2.apply(&g), HeisR::new(2.0, 2.0, 4.0));

        // d_{1/sqrt(N)} ∘ d_{sqrt(N)} is the identity map to 1e-12
        let n = 1e6f64;
        let d = Dilation::new(n.sqrt()).unwrap();
        let dinv = Dilation::new(1.0 / n.sqrt()).unwrap();
        let h = HeisR::new(0.3, -1.7, 2.9);
        let rt = dinv.apply(&d.apply(&h));
        assert!((rt.x - h.x).abs() <= 1e-12 * h.x.abs());
        assert!((rt.y - h.y).abs() <= 1e-12 * h.y.abs());
        assert!((rt.z - h.z).abs() <= 1e-12 * h.z.abs());

        // automorphism, exact for integer t on lattice elements
        let a = HeisZ::new(3, -1, 4);
        let b = HeisZ::new(-2, 5, 1);
        let t = 7i128;
        let lhs = dilate_int(t, &a.mul(&b).unwrap()).unwrap();
        let rhs = dilate_int(t, &a).unwrap().mul(&dilate_int(t, &b).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn overflow_is_reported() {
        let big = HeisZ::new(i128::MAX / 2, i128::MAX / 2, 0);
        assert_eq!(big.mul(&big), Err(HeisError::Overflow));
    }
}
