//! Text-conditioned relevance: tokens whose features point along the instruction embedding
//! dominate the softmax, and pooling spreads that mass to their neighbours.
//!
//! `cargo run --example semantic_prior`

use tokprune::semantic::{cross_modal_softmax, semantic_prior};
use tokprune::{FeatureMatrix, TextEmbedding, TokenGrid};

fn main() -> tokprune::Result<()> {
    let grid = TokenGrid::new(5, 5, 1)?;
    let dim = 3;
    let mut data = Vec::with_capacity(grid.total() * dim);
    for i in 0..grid.total() {
        let f = if i == grid.index(1, 3) {
            [1.0, 0.1, 0.0]
        } else {
            [0.1, 0.2 + 0.01 * i as f64, 1.0]
        };
        data.extend_from_slice(&f);
    }
    let feats = FeatureMatrix::new(grid, dim, data)?;
    let text = TextEmbedding::new(vec![1.0, 0.0, 0.0])?;

    for tau in [0.01, 0.1, 1.0] {
        let p = cross_modal_softmax(&feats, &text, tau)?;
        println!("tau={tau:<5} peak probability {:.4}", p.get(p.argmax()));
    }

    let s = semantic_prior(&feats, &text, 0.01, 3)?;
    for r in 0..grid.rows() {
        let row: Vec<String> = (0..grid.cols())
            .map(|c| format!("{:.2}", s.get(grid.index(r, c))))
            .collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}
