//! Exterior algebra on R^7 with the flat metric.
//!
//! Forms are stored by their strictly increasing components in lexicographic
//! order: 21 for two-forms, 35 for three- and four-forms. Accessors taking
//! arbitrary index tuples apply the permutation sign.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Vec7, DIM};

struct IndexTables {
    lex2: Vec<[usize; 2]>,
    lex3: Vec<[usize; 3]>,
    lex4: Vec<[usize; 4]>,
    rank2: [usize; 49],
    rank3: [usize; 343],
    rank4: Vec<usize>,
    /// For each 4-subset (by rank), the rank of its complementary 3-subset and
    /// the sign of the permutation (complement, subset) of (0..7).
    complement4: Vec<(usize, f64)>,
    /// For each 3-subset, the rank of its complementary 4-subset and the sign
    /// of (complement, subset).
    complement3: Vec<(usize, f64)>,
}

fn tables() -> &'static IndexTables {
    static TABLES: OnceLock<IndexTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut lex2 = Vec::new();
        let mut lex3 = Vec::new();
        let mut lex4 = Vec::new();
        for a in 0..DIM {
            for b in a + 1..DIM {
                lex2.push([a, b]);
                for c in b + 1..DIM {
                    lex3.push([a, b, c]);
                    for d in c + 1..DIM {
                        lex4.push([a, b, c, d]);
                    }
                }
            }
        }
        let mut rank2 = [usize::MAX; 49];
        for (r, i) in lex2.iter().enumerate() {
            rank2[i[0] * 7 + i[1]] = r;
        }
        let mut rank3 = [usize::MAX; 343];
        for (r, i) in lex3.iter().enumerate() {
            rank3[(i[0] * 7 + i[1]) * 7 + i[2]] = r;
        }
        let mut rank4 = vec![usize::MAX; 2401];
        for (r, i) in lex4.iter().enumerate() {
            rank4[((i[0] * 7 + i[1]) * 7 + i[2]) * 7 + i[3]] = r;
        }
        let complement = |subset: &[usize]| -> Vec<usize> {
            (0..DIM).filter(|i| !subset.contains(i)).collect()
        };
        let complement4 = lex4
            .iter()
            .map(|j| {
                let i = complement(j);
                let mut perm = i.clone();
                perm.extend_from_slice(j);
                (rank3[(i[0] * 7 + i[1]) * 7 + i[2]], permutation_sign(&perm))
            })
            .collect();
        let complement3 = lex3
            .iter()
            .map(|j| {
                let i = complement(j);
                let mut perm = i.clone();
                perm.extend_from_slice(j);
                (
                    rank4[((i[0] * 7 + i[1]) * 7 + i[2]) * 7 + i[3]],
                    permutation_sign(&perm),
                )
            })
            .collect();
        IndexTables {
            lex2,
            lex3,
            lex4,
            rank2,
            rank3,
            rank4,
            complement4,
            complement3,
        }
    })
}

/// Sign of a permutation given as a sequence of distinct integers.
pub fn permutation_sign(p: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Sorts `idx` in place and returns the permutation sign, or `None` when an
/// index repeats.
fn sort_with_sign<const K: usize>(mut idx: [usize; K]) -> Option<([usize; K], f64)> {
    let mut sign = 1.0;
    for i in 1..K {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for i in 1..K {
        if idx[i - 1] == idx[i] {
            return None;
        }
    }
    Some((idx, sign))
}

/// Sorted index triples of the 35 three-form components.
pub fn lex3() -> &'static [[usize; 3]] {
    &tables().lex3
}

/// Sorted index quadruples of the 35 four-form components.
pub fn lex4() -> &'static [[usize; 4]] {
    &tables().lex4
}

pub fn lex2() -> &'static [[usize; 2]] {
    &tables().lex2
}

macro_rules! form_type {
    ($name:ident, $len:expr, $deg:expr, $lex:ident, $rank:ident) => {
        #[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
        pub struct $name(#[serde(with = "serde_array")] pub [f64; $len]);

        impl Default for $name {
            fn default() -> Self {
                Self([0.0; $len])
            }
        }

        impl $name {
            pub const LEN: usize = $len;

            pub fn zero() -> Self {
                Self::default()
            }

            /// Component with arbitrary (possibly unsorted) indices.
            pub fn get(&self, idx: [usize; $deg]) -> f64 {
                match sort_with_sign(idx) {
                    Some((sorted, sign)) => sign * self.0[Self::rank_sorted(sorted)],
                    None => 0.0,
                }
            }

            /// Sets the component for `idx` (and implicitly all its permutations).
            pub fn set(&mut self, idx: [usize; $deg], value: f64) {
                if let Some((sorted, sign)) = sort_with_sign(idx) {
                    self.0[Self::rank_sorted(sorted)] = sign * value;
                }
            }

            pub fn rank_sorted(idx: [usize; $deg]) -> usize {
                let mut key = 0;
                for i in idx {
                    key = key * 7 + i;
                }
                tables().$rank[key]
            }

            pub fn sorted_indices() -> &'static [[usize; $deg]] {
                &tables().$lex
            }

            /// Squared norm with the convention that e^{i1..ik} (sorted) has unit length.
            pub fn norm_sq(&self) -> f64 {
                self.0.iter().map(|x| x * x).sum()
            }

            pub fn dot(&self, other: &Self) -> f64 {
                self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
            }

            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.0
                    .iter()
                    .zip(other.0.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                self += rhs;
                self
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: Self) {
                for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
                    *a += b;
                }
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
                    *a -= b;
                }
                self
            }
        }

        impl Neg for $name {
            type Output = Self;
            fn neg(mut self) -> Self {
                for a in self.0.iter_mut() {
                    *a = -*a;
                }
                self
            }
        }

        impl Mul<f64> for $name {
            type Output = Self;
            fn mul(mut self, s: f64) -> Self {
                for a in self.0.iter_mut() {
                    *a *= s;
                }
                self
            }
        }
    };
}

form_type!(TwoForm, 21, 2, lex2, rank2);
form_type!(ThreeForm, 35, 3, lex3, rank3);
form_type!(FourForm, 35, 4, lex4, rank4);

/// serde only derives arrays up to length 32.
mod serde_array {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(a: &[f64; N], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(a.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[f64; N], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| D::Error::invalid_length(v.len(), &"form components"))
    }
}

impl ThreeForm {
    /// phi(X, Y, Z) for vectors given in the flat orthonormal frame.
    pub fn eval(&self, x: &Vec7, y: &Vec7, z: &Vec7) -> f64 {
        let (x, y, z) = (&x.0, &y.0, &z.0);
        let mut acc = 0.0;
        for (v, &[a, b, c]) in self.0.iter().zip(lex3()) {
            if *v == 0.0 {
                continue;
            }
            let det = x[a] * (y[b] * z[c] - y[c] * z[b]) - x[b] * (y[a] * z[c] - y[c] * z[a])
                + x[c] * (y[a] * z[b] - y[b] * z[a]);
            acc += v * det;
        }
        acc
    }

    /// The vector W with g(W, Z) = phi(X, Y, Z), i.e. the cross product of this form.
    pub fn cross(&self, x: &Vec7, y: &Vec7) -> Vec7 {
        let (x, y) = (&x.0, &y.0);
        let mut out = [0.0; 7];
        for (v, &[a, b, c]) in self.0.iter().zip(lex3()) {
            if *v == 0.0 {
                continue;
            }
            out[c] += v * (x[a] * y[b] - x[b] * y[a]);
            out[a] += v * (x[b] * y[c] - x[c] * y[b]);
            out[b] += v * (x[c] * y[a] - x[a] * y[c]);
        }
        Vec7(out)
    }

    /// Full antisymmetric component array phi[a][b][c].
    pub fn to_dense(&self) -> [[[f64; 7]; 7]; 7] {
        let mut d = [[[0.0; 7]; 7]; 7];
        for (v, &[a, b, c]) in self.0.iter().zip(lex3()) {
            d[a][b][c] = *v;
            d[b][c][a] = *v;
            d[c][a][b] = *v;
            d[b][a][c] = -*v;
            d[a][c][b] = -*v;
            d[c][b][a] = -*v;
        }
        d
    }
}

impl FourForm {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; 2401];
        for (v, idx) in self.0.iter().zip(lex4()) {
            if *v == 0.0 {
                continue;
            }
            for_each_permutation4(*idx, |p, sign| {
                d[((p[0] * 7 + p[1]) * 7 + p[2]) * 7 + p[3]] = sign * v;
            });
        }
        d
    }
}

fn for_each_permutation4(idx: [usize; 4], mut f: impl FnMut([usize; 4], f64)) {
    for a in 0..4 {
        for b in 0..4 {
            if b == a {
                continue;
            }
            for c in 0..4 {
                if c == a || c == b {
                    continue;
                }
                let d = 6 - a - b - c;
                let perm = [a, b, c, d];
                f(
                    [idx[a], idx[b], idx[c], idx[d]],
                    permutation_sign(&perm),
                );
            }
        }
    }
}

/// X ⨼ phi, the two-form phi(X, ., .).
pub fn interior3(x: &Vec7, phi: &ThreeForm) -> TwoForm {
    let mut out = TwoForm::zero();
    for (r, &[b, c]) in lex2().iter().enumerate() {
        let mut acc = 0.0;
        for a in 0..DIM {
            if x.0[a] != 0.0 {
                acc += x.0[a] * phi.get([a, b, c]);
            }
        }
        out.0[r] = acc;
    }
    out
}

/// X ⨼ psi for a four-form.
pub fn interior4(x: &Vec7, psi: &FourForm) -> ThreeForm {
    let mut out = ThreeForm::zero();
    for (r, &[b, c, d]) in lex3().iter().enumerate() {
        let mut acc = 0.0;
        for a in 0..DIM {
            if x.0[a] != 0.0 {
                acc += x.0[a] * psi.get([a, b, c, d]);
            }
        }
        out.0[r] = acc;
    }
    out
}

/// X ∧ Y for one-forms.
pub fn wedge11(x: &Vec7, y: &Vec7) -> TwoForm {
    let mut out = TwoForm::zero();
    for (r, &[a, b]) in lex2().iter().enumerate() {
        out.0[r] = x.0[a] * y.0[b] - x.0[b] * y.0[a];
    }
    out
}

/// alpha ∧ X for a two-form alpha.
pub fn wedge21(alpha: &TwoForm, x: &Vec7) -> ThreeForm {
    let mut out = ThreeForm::zero();
    for (r, &[a, b, c]) in lex3().iter().enumerate() {
        out.0[r] = alpha.get([a, b]) * x.0[c] + alpha.get([b, c]) * x.0[a]
            + alpha.get([c, a]) * x.0[b];
    }
    out
}

/// phi ∧ X for a three-form phi.
pub fn wedge31(phi: &ThreeForm, x: &Vec7) -> FourForm {
    let mut out = FourForm::zero();
    for (r, &[a, b, c, d]) in lex4().iter().enumerate() {
        out.0[r] = phi.get([a, b, c]) * x.0[d] - phi.get([a, b, d]) * x.0[c]
            + phi.get([a, c, d]) * x.0[b]
            - phi.get([b, c, d]) * x.0[a];
    }
    out
}

/// Hodge star of a three-form for the flat metric; `orientation` is +1 for
/// the volume form e^1 ∧ ... ∧ e^7 and -1 for its opposite.
pub fn hodge3(phi: &ThreeForm, orientation: f64) -> FourForm {
    let t = tables();
    let mut out = FourForm::zero();
    for (r, &(i, sign)) in t.complement4.iter().enumerate() {
        out.0[r] = orientation * sign * phi.0[i];
    }
    out
}

/// Hodge star of a four-form.
pub fn hodge4(psi: &FourForm, orientation: f64) -> ThreeForm {
    let t = tables();
    let mut out = ThreeForm::zero();
    for (r, &(i, sign)) in t.complement3.iter().enumerate() {
        out.0[r] = orientation * sign * psi.0[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_tables_have_expected_sizes() {
        assert_eq!(lex2().len(), 21);
        assert_eq!(lex3().len(), 35);
        assert_eq!(lex4().len(), 35);
    }

    #[test]
    fn accessor_is_antisymmetric() {
        let mut f = ThreeForm::zero();
        f.set([4, 1, 2], 3.0);
        assert_eq!(f.get([1, 2, 4]), 3.0);
        assert_eq!(f.get([2, 4, 1]), 3.0);
        assert_eq!(f.get([2, 1, 4]), -3.0);
        assert_eq!(f.get([1, 1, 4]), 0.0);
    }

    #[test]
    fn hodge_is_involutive_on_three_forms() {
        let mut f = ThreeForm::zero();
        for (i, v) in f.0.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        for orientation in [1.0, -1.0] {
            let back = hodge4(&hodge3(&f, orientation), orientation);
            assert!(back.max_abs_diff(&f) == 0.0);
        }
    }

    #[test]
    fn wedge_of_one_form_with_itself_vanishes() {
        let x = Vec7([0.3, -1.0, 2.0, 0.0, 0.5, 0.1, -0.7]);
        assert!(wedge11(&x, &x).norm_sq() == 0.0);
    }

    #[test]
    fn interior_of_basis_vector_reads_components() {
        let mut f = ThreeForm::zero();
        f.set([0, 1, 2], 1.0);
        f.set([0, 3, 4], -2.0);
        let a = interior3(&Vec7::basis(0), &f);
        assert_eq!(a.get([1, 2]), 1.0);
        assert_eq!(a.get([4, 3]), 2.0);
        assert_eq!(a.get([1, 3]), 0.0);
    }

    #[test]
    fn dense_expansion_matches_accessor() {
        let mut f = ThreeForm::zero();
        for (i, v) in f.0.iter_mut().enumerate() {
            *v = i as f64 - 17.0;
        }
        let d = f.to_dense();
        for a in 0..7 {
            for b in 0..7 {
                for c in 0..7 {
                    assert_eq!(d[a][b][c], f.get([a, b, c]));
                }
            }
        }
    }
}
