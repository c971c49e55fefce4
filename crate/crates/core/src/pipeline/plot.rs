//! Minimal deterministic line charts rendered to grayscale images.
//!
//! Each chart draws a framed plot area with axis tick marks, a gray
//! validation series, and a black training series (markers at every data
//! point, Bresenham segments between them). White is background. The output
//! is a pure function of the input values.

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::nn::TrainHistory;

pub const CHART_WIDTH: usize = 640;
pub const CHART_HEIGHT: usize = 480;
const MARGIN_LEFT: usize = 48;
const MARGIN_BOTTOM: usize = 40;
const MARGIN_TOP: usize = 16;
const MARGIN_RIGHT: usize = 16;
const TICK_LEN: usize = 4;

const SHADE_TRAIN: u8 = 0;
const SHADE_VAL: u8 = 128;
const SHADE_AXIS: u8 = 0;

struct Frame {
    x0: usize,
    y0: usize, // top of plot area
    width: usize,
    height: usize,
}

impl Frame {
    fn x_of(&self, index: usize, count: usize) -> usize {
        if count <= 1 {
            self.x0 + self.width / 2
        } else {
            self.x0 + index * self.width / (count - 1)
        }
    }

    fn y_of(&self, value: f64, lo: f64, hi: f64) -> usize {
        let t = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
        self.y0 + ((1.0 - t) * self.height as f64).round() as usize
    }
}

fn draw_line(img: &mut GrayImage, x0: i64, y0: i64, x1: i64, y1: i64, shade: u8) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    loop {
        if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
            img.set(x as usize, y as usize, shade);
        }
        if x == x1 && y == y1 {
            break;
        }
        let doubled = 2 * err;
        if doubled >= dy {
            err += dy;
            x += sx;
        }
        if doubled <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn draw_marker(img: &mut GrayImage, x: usize, y: usize, shade: u8) {
    for my in y.saturating_sub(1)..=(y + 1).min(img.height() - 1) {
        for mx in x.saturating_sub(1)..=(x + 1).min(img.width() - 1) {
            img.set(mx, my, shade);
        }
    }
}

fn draw_series(
    img: &mut GrayImage,
    frame: &Frame,
    values: &[f64],
    lo: f64,
    hi: f64,
    shade: u8,
) {
    let count = values.len();
    let points: Vec<(usize, usize)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (frame.x_of(i, count), frame.y_of(v, lo, hi)))
        .collect();
    for pair in points.windows(2) {
        draw_line(
            img,
            pair[0].0 as i64,
            pair[0].1 as i64,
            pair[1].0 as i64,
            pair[1].1 as i64,
            shade,
        );
    }
    for &(x, y) in &points {
        draw_marker(img, x, y, shade);
    }
}

/// Renders one chart with two series sharing a y-range.
pub fn render_chart(train: &[f64], val: &[f64], y_lo: f64, y_hi: f64) -> Result<GrayImage> {
    if train.is_empty() || train.len() != val.len() {
        return Err(Error::argument(
            "chart needs equal-length nonempty series".to_string(),
        ));
    }
    if !(y_hi > y_lo) {
        return Err(Error::argument("chart y-range is empty".to_string()));
    }
    let mut img = GrayImage::filled(CHART_WIDTH, CHART_HEIGHT, 255)?;
    let frame = Frame {
        x0: MARGIN_LEFT,
        y0: MARGIN_TOP,
        width: CHART_WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        height: CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
    };
    let axis_y = frame.y0 + frame.height;

    // Axes.
    draw_line(
        &mut img,
        frame.x0 as i64,
        frame.y0 as i64,
        frame.x0 as i64,
        axis_y as i64,
        SHADE_AXIS,
    );
    draw_line(
        &mut img,
        frame.x0 as i64,
        axis_y as i64,
        (frame.x0 + frame.width) as i64,
        axis_y as i64,
        SHADE_AXIS,
    );

    // Ten y ticks and up to ten x ticks.
    for tick in 0..=10usize {
        let y = frame.y0 + tick * frame.height / 10;
        draw_line(
            &mut img,
            (frame.x0 - TICK_LEN) as i64,
            y as i64,
            frame.x0 as i64,
            y as i64,
            SHADE_AXIS,
        );
    }
    let count = train.len();
    let x_step = (count.max(2) - 1).div_ceil(10).max(1);
    for index in (0..count).step_by(x_step) {
        let x = frame.x_of(index, count);
        draw_line(
            &mut img,
            x as i64,
            axis_y as i64,
            x as i64,
            (axis_y + TICK_LEN) as i64,
            SHADE_AXIS,
        );
    }

    draw_series(&mut img, &frame, val, y_lo, y_hi, SHADE_VAL);
    draw_series(&mut img, &frame, train, y_lo, y_hi, SHADE_TRAIN);
    Ok(img)
}

/// Renders the accuracy chart (fixed [0, 1] range) and the loss chart
/// (range `[0, 1.05 * max]`) for a training history.
pub fn render_history_charts(history: &TrainHistory) -> Result<(GrayImage, GrayImage)> {
    if history.records.is_empty() {
        return Err(Error::argument("history has no epochs".to_string()));
    }
    let train_acc: Vec<f64> = history.records.iter().map(|r| r.train_acc).collect();
    let val_acc: Vec<f64> = history.records.iter().map(|r| r.val_acc).collect();
    let train_loss: Vec<f64> = history.records.iter().map(|r| r.train_loss).collect();
    let val_loss: Vec<f64> = history.records.iter().map(|r| r.val_loss).collect();

    let accuracy = render_chart(&train_acc, &val_acc, 0.0, 1.0)?;
    let loss_max = train_loss
        .iter()
        .chain(&val_loss)
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-6);
    let loss = render_chart(&train_loss, &val_loss, 0.0, loss_max * 1.05)?;
    Ok((accuracy, loss))
}

/// Topmost row holding `shade` in the given column, if any.
#[cfg(test)]
fn top_pixel_of_column(img: &GrayImage, x: usize, shade: u8) -> Option<usize> {
    (0..img.height()).find(|&y| img.get(x, y) == shade)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::EpochRecord;

    fn history(values: &[(f64, f64)]) -> TrainHistory {
        TrainHistory {
            records: values
                .iter()
                .enumerate()
                .map(|(i, &(acc, loss))| EpochRecord {
                    epoch: i + 1,
                    train_loss: loss,
                    train_acc: acc,
                    val_loss: loss * 1.1,
                    val_acc: (acc - 0.02).max(0.0),
                })
                .collect(),
        }
    }

    #[test]
    fn single_epoch_yields_markers() {
        let history = history(&[(0.5, 1.0)]);
        let (accuracy, loss) = render_history_charts(&history).unwrap();
        assert_eq!(accuracy.width(), CHART_WIDTH);
        // A marker cluster exists away from the axes.
        assert!(accuracy.pixels().iter().any(|&p| p == SHADE_TRAIN));
        assert!(loss.pixels().iter().any(|&p| p == SHADE_VAL));
    }

    #[test]
    fn charts_are_deterministic() {
        let history = history(&[(0.3, 1.0), (0.6, 0.5), (0.9, 0.2)]);
        let (a1, l1) = render_history_charts(&history).unwrap();
        let (a2, l2) = render_history_charts(&history).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn monotone_series_has_monotone_columns() {
        // Strictly increasing accuracy: the training polyline's topmost
        // pixel must rise strictly at every data-point column.
        let values: Vec<(f64, f64)> = (0..10)
            .map(|i| (0.05 + 0.09 * i as f64, 1.0 / (i + 1) as f64))
            .collect();
        let history = history(&values);
        let (accuracy, _) = render_history_charts(&history).unwrap();

        let frame_width = CHART_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let mut last_top = usize::MAX;
        for i in 0..values.len() {
            // The first data point sits on the (black) y-axis; sample its
            // marker one column to the right instead.
            let x = MARGIN_LEFT + i * frame_width / (values.len() - 1);
            let x = if i == 0 { x + 1 } else { x };
            let top = top_pixel_of_column(&accuracy, x, SHADE_TRAIN)
                .expect("series pixel in data column");
            assert!(top < last_top, "column {x}: top {top} vs previous {last_top}");
            last_top = top;
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(render_chart(&[], &[], 0.0, 1.0).is_err());
        assert!(render_chart(&[0.1], &[0.1, 0.2], 0.0, 1.0).is_err());
        assert!(render_chart(&[0.1], &[0.2], 1.0, 1.0).is_err());
        assert!(render_history_charts(&TrainHistory::default()).is_err());
    }
}
