//! Exact fraction-free elimination over the integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::poly::Rational;

fn content(row: &[BigInt]) -> BigInt {
    row.iter().fold(BigInt::zero(), |g, x| g.gcd(x))
}

fn make_primitive(row: &mut [BigInt]) {
    let c = content(row);
    if !c.is_zero() && c != BigInt::from(1) {
        for x in row.iter_mut() {
            *x = &*x / &c;
        }
    }
}

/// Clears denominators row by row.
pub fn integer_rows(rows: &[Vec<Rational>]) -> Vec<Vec<BigInt>> {
    rows.iter()
        .map(|r| {
            let l = r.iter().fold(BigInt::from(1), |l, q| l.lcm(q.denom()));
            let mut out: Vec<BigInt> = r.iter().map(|q| q.numer() * (&l / q.denom())).collect();
            make_primitive(&mut out);
            out
        })
        .collect()
}

/// Reduced row echelon form with integer entries: every pivot column is zero
/// outside its pivot row, rows are primitive with positive pivots. Returns the
/// nonzero rows and their pivot columns.
pub fn reduced_echelon(mut m: Vec<Vec<BigInt>>, ncols: usize) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    let mut rank = 0;
    let mut pivots = Vec::new();
    for col in 0..ncols {
        let Some(p) = (rank..m.len())
            .filter(|&r| !m[r][col].is_zero())
            .min_by(|&a, &b| m[a][col].abs().cmp(&m[b][col].abs()).then(a.cmp(&b)))
        else {
            continue;
        };
        m.swap(rank, p);
        if m[rank][col].is_negative() {
            for x in m[rank].iter_mut() {
                *x = -&*x;
            }
        }
        let pivot_row = m[rank].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r == rank || row[col].is_zero() {
                continue;
            }
            let g = pivot_row[col].gcd(&row[col]);
            let a = &pivot_row[col] / &g;
            let b = &row[col] / &g;
            for (x, y) in row.iter_mut().zip(pivot_row.iter()) {
                *x = &a * &*x - &b * y;
            }
            make_primitive(row);
        }
        pivots.push(col);
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    m.truncate(rank);
    (m, pivots)
}

/// Basis of the right nullspace, one primitive integer vector per free column
/// (ascending column order).
pub fn nullspace(m: Vec<Vec<BigInt>>, ncols: usize) -> Vec<Vec<BigInt>> {
    let (rows, pivots) = reduced_echelon(m, ncols);
    let lcm = rows
        .iter()
        .zip(&pivots)
        .fold(BigInt::from(1), |l, (r, &c)| l.lcm(&r[c]));
    let mut out = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut x = vec![BigInt::zero(); ncols];
        x[free] = lcm.clone();
        for (r, &c) in rows.iter().zip(&pivots) {
            x[c] = -(&r[free] * (&lcm / &r[c]));
        }
        make_primitive(&mut x);
        out.push(x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn nullspace_of_small_matrix() {
        // x + 2y = 0
        let ns = nullspace(vec![b(&[1, 2])], 2);
        assert_eq!(ns, vec![b(&[-2, 1])]);
        let ns = nullspace(vec![b(&[2, 4, 6]), b(&[1, 1, 1])], 3);
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        assert!((&v[0] * BigInt::from(2) + &v[1] * BigInt::from(4) + &v[2] * BigInt::from(6)).is_zero());
        assert!((&v[0] + &v[1] + &v[2]).is_zero());
        assert!(nullspace(vec![b(&[1, 0]), b(&[0, 3])], 2).is_empty());
    }

    #[test]
    fn echelon_is_reduced() {
        let (rows, piv) = reduced_echelon(vec![b(&[0, 2, 4]), b(&[3, 1, 0]), b(&[3, 3, 4])], 3);
        assert_eq!(piv, vec![0, 1]);
        assert_eq!(rows.len(), 2);
        assert!(rows[0][1].is_zero() && rows[1][0].is_zero());
    }
}
