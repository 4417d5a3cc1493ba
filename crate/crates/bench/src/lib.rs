//! Input generators shared by the benchmarks.

use uoi_core::{BBox, ProposalRecord};

/// Deterministic pseudo-random records laid out as `clusters` blobs of
/// `per_cluster` overlapping proposals on one image.
pub fn clustered_records(clusters: usize, per_cluster: usize, seed: u64) -> Vec<ProposalRecord> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        // xorshift64*
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        (state.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut out = Vec::with_capacity(clusters * per_cluster);
    for c in 0..clusters {
        let cx = 50.0 + next() * 900.0;
        let cy = 50.0 + next() * 900.0;
        let w = 20.0 + next() * 120.0;
        let h = 20.0 + next() * 120.0;
        for _ in 0..per_cluster {
            let jx = (next() - 0.5) * 0.4 * w;
            let jy = (next() - 0.5) * 0.4 * h;
            let proposal = BBox::from_center(cx + jx, cy + jy, w * (0.8 + 0.4 * next()), h * (0.8 + 0.4 * next()))
                .expect("positive size");
            let regressed = BBox::from_center(cx + jx * 0.3, cy + jy * 0.3, w * 0.9, h * 0.9).expect("positive size");
            out.push(ProposalRecord {
                proposal,
                regressed,
                score: next(),
                class_id: (c % 3) as u32,
                image_id: 0,
            });
        }
    }
    out
}
