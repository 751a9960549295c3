use super::WordBox;

/// One-dimensional gap clustering.
///
/// Sorts the centers, starts at index 0 and opens a new index whenever the gap
/// to the previous sorted center exceeds `gap_threshold`. Indices are returned
/// in input order.
pub fn cluster_to_grid(centers: &[f64], gap_threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    let mut out = vec![0; centers.len()];
    let mut idx = 0;
    for w in 0..order.len() {
        if w > 0 && centers[order[w]] - centers[order[w - 1]] > gap_threshold {
            idx += 1;
        }
        out[order[w]] = idx;
    }
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Relabels words with grid indices recovered from geometry alone.
///
/// Rows come from clustering word y-centers. Within a row, words separated by
/// at most the threshold are merged into text segments; columns come from
/// clustering the segments' left edges. The threshold is 0.6 × the median
/// word height. Returns the threshold used.
pub fn recover_word_grid(words: &mut [WordBox]) -> f64 {
    if words.is_empty() {
        return 0.0;
    }
    let threshold = 0.6 * median(words.iter().map(|w| w.bbox.height()).collect());
    let threshold = threshold.max(f64::EPSILON);
    let ys: Vec<f64> = words.iter().map(|w| w.bbox.center().y).collect();
    let rows = cluster_to_grid(&ys, threshold);

    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by(|&a, &b| rows[a].cmp(&rows[b]).then(words[a].bbox.x0.total_cmp(&words[b].bbox.x0)));
    let mut segment_of = vec![0; words.len()];
    let mut lefts: Vec<f64> = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let joins = k > 0 && {
            let prev = order[k - 1];
            rows[prev] == rows[i] && words[i].bbox.x0 - words[prev].bbox.x1 <= threshold
        };
        if !joins {
            lefts.push(words[i].bbox.x0);
        }
        segment_of[i] = lefts.len() - 1;
    }
    let cols = cluster_to_grid(&lefts, threshold);
    for (i, w) in words.iter_mut().enumerate() {
        w.grid_row = rows[i];
        w.grid_col = cols[segment_of[i]];
    }
    threshold
}
