//! Row-major matrix product with a fixed per-element summation order.
//!
//! Every output element is accumulated as `((0 + a₀b₀) + a₁b₁) + …` with `k`
//! ascending and no fused multiply-add. The fixed-point runtime relies on this
//! to reproduce float results bit for bit.

const MR: usize = 6;
const NR: usize = 8;

/// `c[m×n] = a[m×k] · b[k×n]`, overwriting `c`.
pub(crate) fn matmul(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.fill(0.0);
        return;
    }

    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: feature presence checked at runtime.
            unsafe { matmul_avx512(a, b, c, m, k, n) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: feature presence checked at runtime.
            unsafe { matmul_avx2(a, b, c, m, k, n) };
            return;
        }
    }
    matmul_generic(a, b, c, m, k, n);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn matmul_avx512(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    matmul_generic(a, b, c, m, k, n)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn matmul_avx2(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    matmul_generic(a, b, c, m, k, n)
}

#[inline(always)]
fn matmul_generic(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    let m_panels = m.div_ceil(MR);
    let n_panels = n.div_ceil(NR);

    // A as interleaved MR-row panels; padding rows are zero
    // and only ever lands in discarded outputs.
    let mut a_pack = vec![0.0; m_panels * k * MR];
    for p in 0..m_panels {
        let panel = &mut a_pack[p * k * MR..(p + 1) * k * MR];
        for r in 0..MR {
            let row = p * MR + r;
            if row >= m {
                break;
            }
            let src = &a[row * k..(row + 1) * k];
            for (kk, &v) in src.iter().enumerate() {
                panel[kk * MR + r] = v;
            }
        }
    }
    // Full-width column panels are read in place; only a ragged last panel is copied.
    let full_panels = n / NR;
    let mut edge = Vec::new();
    if full_panels < n_panels {
        let col0 = full_panels * NR;
        let width = n - col0;
        edge = vec![0.0; k * NR];
        for kk in 0..k {
            edge[kk * NR..kk * NR + width].copy_from_slice(&b[kk * n + col0..kk * n + col0 + width]);
        }
    }

    for jp in 0..n_panels {
        let col0 = jp * NR;
        let width = NR.min(n - col0);
        for ip in 0..m_panels {
            let ap = &a_pack[ip * k * MR..(ip + 1) * k * MR];
            let acc = if jp < full_panels {
                micro_kernel(ap, &b[col0..], n, k)
            } else {
                micro_kernel(ap, &edge, NR, k)
            };
            let row0 = ip * MR;
            let height = MR.min(m - row0);
            for r in 0..height {
                c[(row0 + r) * n + col0..(row0 + r) * n + col0 + width].copy_from_slice(&acc[r][..width]);
            }
        }
    }
}

#[inline(always)]
fn micro_kernel(ap: &[f64], b: &[f64], stride: usize, k: usize) -> [[f64; NR]; MR] {
    let mut acc = [[0.0f64; NR]; MR];
    for (kk, a_col) in ap.chunks_exact(MR).enumerate().take(k) {
        let b_row: &[f64; NR] = b[kk * stride..kk * stride + NR].try_into().expect("NR columns");
        for r in 0..MR {
            let av = a_col[r];
            for col in 0..NR {
                acc[r][col] += av * b_row[col];
            }
        }
    }
    acc
}

/// `c[m×n] = a[m×k] · b[n×k]ᵀ` for long inner dimensions (weight gradients).
///
/// Each element is reduced in LANES interleaved partial sums combined in a
/// fixed order, so results are deterministic but not sequential-order exact.
pub(crate) fn matmul_abt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), n * k);
    assert_eq!(c.len(), m * n);
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: feature presence checked at runtime.
            unsafe { abt_avx512(a, b, c, m, k, n) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: feature presence checked at runtime.
            unsafe { abt_avx2(a, b, c, m, k, n) };
            return;
        }
    }
    abt_generic(a, b, c, m, k, n);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn abt_avx512(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    abt_generic(a, b, c, m, k, n)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn abt_avx2(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    abt_generic(a, b, c, m, k, n)
}

const LANES: usize = 8;

#[inline(always)]
fn abt_generic(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    let mut i = 0;
    while i < m {
        let ti = if m - i >= 2 { 2 } else { 1 };
        let mut j = 0;
        while j < n {
            let tj = (n - j).min(3);
            match (ti, tj) {
                (2, 3) => abt_tile::<2, 3>(a, b, c, i, j, k, n),
                (2, 2) => abt_tile::<2, 2>(a, b, c, i, j, k, n),
                (2, 1) => abt_tile::<2, 1>(a, b, c, i, j, k, n),
                (1, 3) => abt_tile::<1, 3>(a, b, c, i, j, k, n),
                (1, 2) => abt_tile::<1, 2>(a, b, c, i, j, k, n),
                _ => abt_tile::<1, 1>(a, b, c, i, j, k, n),
            }
            j += tj;
        }
        i += ti;
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn abt_tile<const TI: usize, const TJ: usize>(a: &[f64], b: &[f64], c: &mut [f64], i: usize, j: usize, k: usize, n: usize) {
    let rows: [&[f64]; TI] = std::array::from_fn(|r| &a[(i + r) * k..(i + r + 1) * k]);
    let cols: [&[f64]; TJ] = std::array::from_fn(|q| &b[(j + q) * k..(j + q + 1) * k]);
    let mut acc = [[[0.0f64; LANES]; TJ]; TI];
    let body = k / LANES * LANES;
    let mut kk = 0;
    while kk < body {
        let av: [&[f64; LANES]; TI] = std::array::from_fn(|r| rows[r][kk..kk + LANES].try_into().unwrap());
        let bv: [&[f64; LANES]; TJ] = std::array::from_fn(|q| cols[q][kk..kk + LANES].try_into().unwrap());
        for r in 0..TI {
            for q in 0..TJ {
                for l in 0..LANES {
                    acc[r][q][l] += av[r][l] * bv[q][l];
                }
            }
        }
        kk += LANES;
    }
    for r in 0..TI {
        for q in 0..TJ {
            let mut s = 0.0;
            for lane in acc[r][q] {
                s += lane;
            }
            for t in body..k {
                s += rows[r][t] * cols[q][t];
            }
            c[(i + r) * n + j + q] = s;
        }
    }
}

/// Transposes a row-major `rows × cols` matrix.
pub(crate) fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    const BLOCK: usize = 32;
    for r0 in (0..rows).step_by(BLOCK) {
        for c0 in (0..cols).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(rows) {
                for c in c0..(c0 + BLOCK).min(cols) {
                    out[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    out
}
