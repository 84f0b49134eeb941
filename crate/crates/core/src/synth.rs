//! Seeded generators for the two datasets the pipelines expect.

use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::classify::logreg::sigmoid;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tabular::{Column, Table};

pub const PLATFORMS: [&str; 7] = ["Facebook", "Instagram", "LinkedIn", "Pinterest", "Snapchat", "TikTok", "Twitter"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialSynthSpec {
    pub n: usize,
    pub seed: u64,
    /// Probability that a row belongs to the high-engagement regime.
    pub high_fraction: f64,
}

impl SocialSynthSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            high_fraction: 0.5,
        }
    }
}

/// Social-media usage table with integer activity counts and an `App`
/// column. High-engagement rows draw Daily_Minutes_Spent from 300..=500
/// and Follows_Per_Day from 30..=50; the rest from 5..=200 and 0..=20.
/// Posts and likes are independent of the regime.
pub fn gen_social(spec: &SocialSynthSpec) -> Result<Table> {
    gen_social_with_regimes(spec).map(|(t, _)| t)
}

/// As [`gen_social`], also returning each row's regime (1 = high).
pub fn gen_social_with_regimes(spec: &SocialSynthSpec) -> Result<(Table, Vec<u8>)> {
    if spec.n < 10 {
        return Err(Error::InvalidParameter(format!("need n >= 10, got {}", spec.n)));
    }
    if !(spec.high_fraction > 0.0 && spec.high_fraction < 1.0) {
        return Err(Error::InvalidParameter("high_fraction must lie in (0, 1)".into()));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let int = |rng: &mut SplitMix64, lo: usize, hi: usize| (lo + rng.below(hi - lo + 1)) as f64;
    let n = spec.n;
    let (mut daily, mut posts, mut likes, mut follows) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut app = Vec::with_capacity(n);
    let mut regime = Vec::with_capacity(n);
    for _ in 0..n {
        let high = rng.next_f64() < spec.high_fraction;
        regime.push(u8::from(high));
        if high {
            daily.push(int(&mut rng, 300, 500));
            follows.push(int(&mut rng, 30, 50));
        } else {
            daily.push(int(&mut rng, 5, 200));
            follows.push(int(&mut rng, 0, 20));
        }
        posts.push(int(&mut rng, 0, 20));
        likes.push(int(&mut rng, 0, 200));
        app.push(Some(PLATFORMS[rng.below(PLATFORMS.len())]));
    }
    let t = Table::new(
        "social",
        vec![
            Column::dense("Daily_Minutes_Spent", &daily),
            Column::dense("Posts_Per_Day", &posts),
            Column::dense("Likes_Per_Day", &likes),
            Column::dense("Follows_Per_Day", &follows),
            Column::categorical("App", &app),
        ],
    )?;
    Ok((t, regime))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradSynthSpec {
    pub n: usize,
    pub seed: u64,
    /// Norm of the true coefficient vector over the standardised
    /// dominant features; sets how separable the label is.
    pub signal: f64,
}

impl GradSynthSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, seed, signal: 3.2 }
    }
}

pub const GRAD_LABEL: &str = "Entrepreneurship";

/// Numeric columns in output order. Indices 6, 8 and 9 drive the label.
pub const GRAD_NUMERIC: [&str; 13] = [
    "Age",
    "High_School_GPA",
    "SAT_Score",
    "University_Ranking",
    "University_GPA",
    "Internships_Completed",
    "Projects_Completed",
    "Certifications",
    "Soft_Skills_Score",
    "Networking_Score",
    "Job_Offers",
    "Starting_Salary",
    "Career_Satisfaction",
];

pub const GRAD_DOMINANT: [usize; 3] = [8, 9, 6];

/// (mean, sd, lo, hi, decimals) of the rounded, clipped normal features.
const GRAD_NORMAL: [(f64, f64, f64, f64, i32); 13] = [
    (23.5, 3.4, 18.0, 29.0, 0),
    (3.0, 0.5, 2.0, 4.0, 2),
    (1250.0, 200.0, 900.0, 1600.0, 0),
    (500.0, 250.0, 1.0, 1000.0, 0),
    (3.0, 0.5, 2.0, 4.0, 2),
    (2.0, 1.2, 0.0, 4.0, 0),
    (4.5, 2.4, 0.0, 9.0, 0),
    (2.5, 1.5, 0.0, 5.0, 0),
    (5.5, 2.2, 1.0, 10.0, 0),
    (5.5, 2.2, 1.0, 10.0, 0),
    (2.5, 1.5, 0.0, 5.0, 0),
    // Starting salary is log-normal; this row is unused.
    (0.0, 0.0, 0.0, 0.0, 0),
    (5.5, 2.2, 1.0, 10.0, 0),
];

const SALARY_INDEX: usize = 11;

const GENDERS: [&str; 2] = ["Female", "Male"];
const FIELDS: [&str; 6] = ["Arts", "Business", "Computer Science", "Engineering", "Law", "Medicine"];
const LEVELS: [&str; 4] = ["Entry", "Executive", "Mid", "Senior"];

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

/// Graduate-profile table: 13 numeric columns, Gender, Field_of_Study and
/// Current_Job_Level (25 columns once one-hot encoded without dropping),
/// and a Yes/No `Entrepreneurship` label drawn from a logistic model over
/// the three dominant features.
pub fn gen_grad(spec: &GradSynthSpec) -> Result<Table> {
    if spec.n < 50 {
        return Err(Error::InvalidParameter(format!("need n >= 50, got {}", spec.n)));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let salary = LogNormal::new(50_000f64.ln(), 0.23).expect("valid log-normal");
    let beta = spec.signal / (GRAD_DOMINANT.len() as f64).sqrt();
    let n = spec.n;
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); GRAD_NUMERIC.len()];
    let mut gender = Vec::with_capacity(n);
    let mut field = Vec::with_capacity(n);
    let mut level = Vec::with_capacity(n);
    let mut label = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = [0.0; 13];
        for (j, &(mean, sd, lo, hi, dec)) in GRAD_NORMAL.iter().enumerate() {
            row[j] = if j == SALARY_INDEX {
                round_to(salary.sample(&mut rng), -2)
            } else {
                round_to(mean + sd * std_normal.sample(&mut rng), dec).clamp(lo, hi)
            };
        }
        let eta: f64 = GRAD_DOMINANT
            .iter()
            .map(|&j| beta * (row[j] - GRAD_NORMAL[j].0) / GRAD_NORMAL[j].1)
            .sum();
        let yes = rng.next_f64() < sigmoid(eta);
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
        gender.push(Some(GENDERS[rng.below(GENDERS.len())]));
        field.push(Some(FIELDS[rng.below(FIELDS.len())]));
        level.push(Some(LEVELS[rng.below(LEVELS.len())]));
        label.push(Some(if yes { "Yes" } else { "No" }));
    }
    let mut columns: Vec<Column> = GRAD_NUMERIC
        .iter()
        .zip(&cols)
        .map(|(name, c)| Column::dense(*name, c))
        .collect();
    columns.push(Column::categorical("Gender", &gender));
    columns.push(Column::categorical("Field_of_Study", &field));
    columns.push(Column::categorical("Current_Job_Level", &level));
    columns.push(Column::categorical(GRAD_LABEL, &label));
    Table::new("grad", columns)
}
