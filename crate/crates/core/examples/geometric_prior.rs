//! Edge prior on a synthetic frame: a bright square on a dark background lights up the
//! tokens its border passes through, while flat regions score zero.
//!
//! `cargo run --example geometric_prior`

use tokprune::geometry::geometric_prior;
use tokprune::{RgbImage, TokenGrid};

fn main() -> tokprune::Result<()> {
    let grid = TokenGrid::new(6, 6, 8)?;
    let mut img = RgbImage::filled(grid.image_width(), grid.image_height(), [20, 20, 30])?;
    img.fill_rect(12, 12, 36, 36, [230, 210, 40]);

    let e = geometric_prior(&img, &grid)?;
    for r in 0..grid.rows() {
        let row: Vec<String> = (0..grid.cols())
            .map(|c| format!("{:.2}", e.get(grid.index(r, c))))
            .collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}
