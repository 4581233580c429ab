//! Published leaderboard and ablation numbers, used as report fixtures.

/// Class-wise leaderboard IoU (%), in class-index order.
pub const LEADERBOARD_CLASS_IOU: [f64; 22] = [
    95.6, 70.7, 73.5, 29.6, 8.4, 88.5, 91.5, 73.1, 32.2, 80.2, 60.0, 70.6, 80.3, 97.0, 86.8, 73.2,
    75.1, 92.6, 48.5, 51.5, 70.6, 86.7,
];

/// Leaderboard mIoU (%), reported to two decimals.
pub const LEADERBOARD_MIOU: f64 = 69.83;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AblationRow {
    pub backbone: &'static str,
    pub augmentation: &'static str,
    pub tta_views: usize,
    pub miou: f64,
}

const fn row(
    backbone: &'static str,
    augmentation: &'static str,
    tta_views: usize,
    miou: f64,
) -> AblationRow {
    AblationRow {
        backbone,
        augmentation,
        tta_views,
        miou,
    }
}

/// Validation-set ablation (backbone × augmentation × TTA count). These
/// need full-scale network training and are not reproduced here.
pub const ABLATION: [AblationRow; 11] = [
    row("MinkUNet-18", "none", 1, 68.02),
    row("MinkUNet-34", "none", 1, 70.18),
    row("MinkUNet-50", "none", 1, 70.34),
    row("MinkUNet-101", "none", 1, 70.98),
    row("MinkUNet-101", "lasermix", 1, 71.37),
    row("MinkUNet-101", "polarmix", 1, 71.31),
    row("MinkUNet-101", "both", 1, 72.06),
    row("MinkUNet-101", "both", 3, 72.41),
    row("MinkUNet-101", "both", 6, 72.67),
    row("MinkUNet-101", "both", 8, 74.03),
    row("MinkUNet-101", "both", 10, 73.67),
];
