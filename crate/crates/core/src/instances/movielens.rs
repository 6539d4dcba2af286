//! MovieLens-100k instances: one agent per user attribute class, movies as
//! actions embedded by truncated SVD of the rating matrix (or an external file).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::zipcodes::state_for_zip;
use crate::algorithms::ols;
use crate::env::{ActionProfile, ActionSet, ProblemInstance};
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribute {
    Gender,
    Age,
    Occupation,
    Geography,
}

impl std::str::FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gender" => Ok(Attribute::Gender),
            "age" => Ok(Attribute::Age),
            "occupation" => Ok(Attribute::Occupation),
            "geography" => Ok(Attribute::Geography),
            _ => Err(Error::InvalidConfig(format!(
                "unknown attribute `{s}` (expected gender | age | occupation | geography)"
            ))),
        }
    }
}

/// How action vectors are formed from the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionMode {
    /// Every agent sees the same movie embeddings at every step.
    #[default]
    Shared,
    /// At each step the agent serves one of its users, drawn uniformly; the
    /// action for movie `j` is `movie_j ⊙ user_factor`.
    UserModulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovieLensSpec {
    pub ratings_path: PathBuf,
    pub users_path: PathBuf,
    pub attribute: Attribute,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Keep the N most-rated movies (ties: lower movie id).
    #[serde(default = "default_max_movies")]
    pub max_movies: Option<usize>,
    /// Keep the N most active users (ties: lower user id).
    #[serde(default)]
    pub max_users: Option<usize>,
    /// Use precomputed movie embeddings instead of the SVD.
    #[serde(default)]
    pub embedding_path: Option<PathBuf>,
    /// Regress on `(r - 1) / 4` instead of the raw rating.
    #[serde(default)]
    pub rescale_ratings: bool,
    #[serde(default)]
    pub action_mode: ActionMode,
    /// Ridge for the `theta*` fit; `None` means plain least squares.
    #[serde(default)]
    pub ridge: Option<f64>,
    /// Seed for the user schedule in `user-modulated` mode.
    #[serde(default)]
    pub seed: u64,
    /// Lower bounds of age brackets after the first (`<b0`, `b0-(b1-1)`, …, `bn+`).
    #[serde(default = "default_age_brackets")]
    pub age_brackets: Vec<u32>,
    /// Number of states kept for the geography attribute.
    #[serde(default = "default_geo_top_k")]
    pub geo_top_k: usize,
}

fn default_dim() -> usize {
    20
}

fn default_max_movies() -> Option<usize> {
    Some(200)
}

fn default_age_brackets() -> Vec<u32> {
    vec![18, 25, 35, 45, 50, 56]
}

fn default_geo_top_k() -> usize {
    8
}

impl MovieLensSpec {
    pub fn new(ratings_path: impl Into<PathBuf>, users_path: impl Into<PathBuf>, attribute: Attribute) -> Self {
        MovieLensSpec {
            ratings_path: ratings_path.into(),
            users_path: users_path.into(),
            attribute,
            dim: default_dim(),
            max_movies: default_max_movies(),
            max_users: None,
            embedding_path: None,
            rescale_ratings: false,
            action_mode: ActionMode::Shared,
            ridge: None,
            seed: 0,
            age_brackets: default_age_brackets(),
            geo_top_k: default_geo_top_k(),
        }
    }

    /// Both files from one MovieLens-100k directory.
    pub fn from_dir(dir: &Path, attribute: Attribute) -> Self {
        Self::new(dir.join("u.data"), dir.join("u.user"), attribute)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingRecord {
    pub user: u32,
    pub movie: u32,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user: u32,
    pub age: u32,
    pub gender: String,
    pub occupation: String,
    pub zip: String,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Tab-separated `user item rating timestamp`.
pub fn read_ratings(path: &Path) -> Result<Vec<RatingRecord>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Ingestion { path: path.into(), line: i + 1, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated fields, got {}", f.len())));
        }
        let rating: f64 = f[2].trim().parse().map_err(|e| bad(format!("rating: {e}")))?;
        if !rating.is_finite() {
            return Err(bad("rating is not finite".into()));
        }
        out.push(RatingRecord {
            user: f[0].trim().parse().map_err(|e| bad(format!("user id: {e}")))?,
            movie: f[1].trim().parse().map_err(|e| bad(format!("item id: {e}")))?,
            rating,
        });
    }
    if out.is_empty() {
        return Err(Error::Ingestion { path: path.into(), line: 0, msg: "no ratings".into() });
    }
    Ok(out)
}

/// Pipe-separated `id|age|gender|occupation|zip`.
pub fn read_users(path: &Path) -> Result<Vec<UserRecord>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Ingestion { path: path.into(), line: i + 1, msg };
        let f: Vec<&str> = line.split('|').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 pipe-separated fields, got {}", f.len())));
        }
        let gender = f[2].trim();
        if gender != "M" && gender != "F" {
            return Err(bad(format!("gender must be M or F, got `{gender}`")));
        }
        out.push(UserRecord {
            user: f[0].trim().parse().map_err(|e| bad(format!("user id: {e}")))?,
            age: f[1].trim().parse().map_err(|e| bad(format!("age: {e}")))?,
            gender: gender.to_string(),
            occupation: f[3].trim().to_string(),
            zip: f[4].trim().to_string(),
        });
    }
    Ok(out)
}

pub const OCCUPATION_CLASSES: [&str; 8] = [
    "student",
    "technical",
    "management",
    "creative",
    "academic",
    "business",
    "healthcare",
    "non-professional",
];

/// Collapses the 21 raw MovieLens occupations into eight classes.
pub fn occupation_class(raw: &str) -> Option<usize> {
    Some(match raw {
        "student" => 0,
        "engineer" | "programmer" | "technician" => 1,
        "administrator" | "executive" => 2,
        "artist" | "entertainment" | "writer" => 3,
        "educator" | "librarian" | "scientist" => 4,
        "marketing" | "salesman" | "lawyer" => 5,
        "doctor" | "healthcare" => 6,
        "homemaker" | "none" | "other" | "retired" => 7,
        _ => return None,
    })
}

pub fn age_labels(brackets: &[u32]) -> Vec<String> {
    let mut out = Vec::with_capacity(brackets.len() + 1);
    out.push(format!("<{}", brackets[0]));
    for w in brackets.windows(2) {
        out.push(format!("{}-{}", w[0], w[1] - 1));
    }
    out.push(format!("{}+", brackets[brackets.len() - 1]));
    out
}

pub fn age_bracket(age: u32, brackets: &[u32]) -> usize {
    brackets.iter().take_while(|b| age >= **b).count()
}

/// Users partitioned into agents, with display labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub labels: Vec<String>,
    /// User ids per agent, ascending.
    pub members: Vec<Vec<u32>>,
}

/// Partitions `users` by attribute. Users outside every class (non-US zip,
/// state outside the top k) are left out; empty classes are dropped.
pub fn group_users(users: &[UserRecord], spec: &MovieLensSpec) -> Result<Grouping> {
    let (labels, class_of): (Vec<String>, Box<dyn Fn(&UserRecord) -> Result<Option<usize>>>) = match spec.attribute {
        Attribute::Gender => (
            vec!["Male".into(), "Female".into()],
            Box::new(|u: &UserRecord| Ok(Some(usize::from(u.gender == "F")))),
        ),
        Attribute::Occupation => (
            OCCUPATION_CLASSES.iter().map(|s| s.to_string()).collect(),
            Box::new(|u: &UserRecord| {
                occupation_class(&u.occupation)
                    .map(Some)
                    .ok_or_else(|| Error::InvalidInput(format!("user {}: unknown occupation `{}`", u.user, u.occupation)))
            }),
        ),
        Attribute::Age => {
            let b = spec.age_brackets.clone();
            if b.is_empty() || b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig("age_brackets must be non-empty and strictly increasing".into()));
            }
            (age_labels(&b), Box::new(move |u: &UserRecord| Ok(Some(age_bracket(u.age, &b)))))
        }
        Attribute::Geography => {
            if spec.geo_top_k == 0 {
                return Err(Error::InvalidConfig("geo_top_k must be positive".into()));
            }
            let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
            for u in users {
                if let Some(s) = state_for_zip(&u.zip) {
                    *counts.entry(s).or_default() += 1;
                }
            }
            let mut ranked: Vec<(&'static str, usize)> = counts.into_iter().collect();
            // most users first, alphabetical on ties
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            ranked.truncate(spec.geo_top_k);
            let states: Vec<&'static str> = ranked.into_iter().map(|(s, _)| s).collect();
            let labels = states.iter().map(|s| s.to_string()).collect();
            (
                labels,
                Box::new(move |u: &UserRecord| Ok(state_for_zip(&u.zip).and_then(|s| states.iter().position(|x| *x == s)))),
            )
        }
    };
    let mut members = vec![Vec::new(); labels.len()];
    for u in users {
        if let Some(c) = class_of(u)? {
            members[c].push(u.user);
        }
    }
    let mut out = Grouping { labels: Vec::new(), members: Vec::new() };
    for (label, mut m) in labels.into_iter().zip(members) {
        if !m.is_empty() {
            m.sort_unstable();
            out.labels.push(label);
            out.members.push(m);
        }
    }
    if out.members.is_empty() {
        return Err(Error::InvalidInput("no user falls in any attribute class".into()));
    }
    Ok(out)
}

/// Observed entries of a users × movies rating matrix (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRatings {
    pub num_users: usize,
    pub num_movies: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseRatings {
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push((i, j, m[(i, j)]));
            }
        }
        SparseRatings { num_users: m.nrows(), num_movies: m.ncols(), entries }
    }

    /// Per-movie mean imputation followed by per-movie centering; repeated
    /// entries are averaged. Unrated movies become zero columns.
    pub fn centered_dense(&self) -> (DMatrix<f64>, Vec<f64>) {
        let mut sum = DMatrix::<f64>::zeros(self.num_users, self.num_movies);
        let mut cnt = DMatrix::<u32>::zeros(self.num_users, self.num_movies);
        for &(u, m, r) in &self.entries {
            sum[(u, m)] += r;
            cnt[(u, m)] += 1;
        }
        let mut means = vec![0.0; self.num_movies];
        let mut out = DMatrix::<f64>::zeros(self.num_users, self.num_movies);
        for j in 0..self.num_movies {
            let (mut s, mut n) = (0.0, 0usize);
            for i in 0..self.num_users {
                if cnt[(i, j)] > 0 {
                    s += sum[(i, j)] / f64::from(cnt[(i, j)]);
                    n += 1;
                }
            }
            if n == 0 {
                continue;
            }
            means[j] = s / n as f64;
            for i in 0..self.num_users {
                if cnt[(i, j)] > 0 {
                    out[(i, j)] = sum[(i, j)] / f64::from(cnt[(i, j)]) - means[j];
                }
            }
        }
        (out, means)
    }
}

/// Rank-`d` truncated SVD `U Σ Vᵀ` of the centered rating matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdEmbedding {
    /// `U`, users × d.
    pub user_factors: DMatrix<f64>,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `V`, movies × d.
    pub movie_factors: DMatrix<f64>,
    pub movie_means: Vec<f64>,
}

impl SvdEmbedding {
    /// Movie embeddings `V Σ`, one row per movie.
    pub fn movie_embeddings(&self) -> Vec<Vec<f64>> {
        (0..self.movie_factors.nrows())
            .map(|j| {
                self.singular_values
                    .iter()
                    .enumerate()
                    .map(|(k, s)| self.movie_factors[(j, k)] * s)
                    .collect()
            })
            .collect()
    }

    /// Row `i` of `U`.
    pub fn user_factor(&self, i: usize) -> Vec<f64> {
        self.user_factors.row(i).iter().copied().collect()
    }

    /// `U Σ Vᵀ` — approximates the centered matrix.
    pub fn reconstruct_centered(&self) -> DMatrix<f64> {
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.singular_values));
        &self.user_factors * sigma * self.movie_factors.transpose()
    }
}

/// Truncated SVD embedding. Each component's sign is chosen so that its
/// largest-magnitude movie loading (first on ties) is positive.
pub fn embed_svd(ratings: &SparseRatings, d: usize) -> Result<SvdEmbedding> {
    if d == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
    }
    let limit = ratings.num_users.min(ratings.num_movies);
    if d > limit {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension {d} exceeds min(users, movies) = {limit}"
        )));
    }
    let (centered, movie_means) = ratings.centered_dense();
    let svd = centered.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    order.truncate(d);

    let mut user_factors = DMatrix::zeros(ratings.num_users, d);
    let mut movie_factors = DMatrix::zeros(ratings.num_movies, d);
    let mut singular_values = Vec::with_capacity(d);
    for (k, &src) in order.iter().enumerate() {
        let mut vcol: Vec<f64> = v_t.row(src).iter().copied().collect();
        let mut ucol: Vec<f64> = u.column(src).iter().copied().collect();
        let mut pivot = 0;
        for (j, x) in vcol.iter().enumerate() {
            if x.abs() > vcol[pivot].abs() {
                pivot = j;
            }
        }
        if vcol[pivot] < 0.0 {
            vcol.iter_mut().for_each(|x| *x = -*x);
            ucol.iter_mut().for_each(|x| *x = -*x);
        }
        for (j, x) in vcol.into_iter().enumerate() {
            movie_factors[(j, k)] = x;
        }
        for (i, x) in ucol.into_iter().enumerate() {
            user_factors[(i, k)] = x;
        }
        singular_values.push(svd.singular_values[src]);
    }
    Ok(SvdEmbedding { user_factors, singular_values, movie_factors, movie_means })
}

/// One regression row: action index, optional user context, rating.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRecord {
    pub action: usize,
    pub context: Option<Vec<f64>>,
    pub rating: f64,
}

/// Least-squares `theta*` over rows `(x, rating)` with `x = embedding[action]`
/// (times the context elementwise, when present).
pub fn fit_theta_star(embeddings: &[Vec<f64>], records: &[RegressionRecord], ridge: Option<f64>) -> Result<Vec<f64>> {
    let dim = embeddings
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidInput("no action embeddings".into()))?;
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let x = embeddings
            .get(r.action)
            .ok_or_else(|| Error::InvalidInput(format!("action index {} out of range", r.action)))?;
        let feat = match &r.context {
            None => x.clone(),
            Some(c) if c.len() == dim => x.iter().zip(c).map(|(a, b)| a * b).collect(),
            Some(c) => return Err(Error::InvalidInput(format!("context length {} != {dim}", c.len()))),
        };
        rows.push((feat, r.rating));
    }
    let est = ols(rows.iter().map(|(x, y)| (x.as_slice(), *y)), dim, ridge.unwrap_or(0.0))?;
    Ok(est.theta_hat.iter().copied().collect())
}

/// `num_actions d` header, then one whitespace-separated row per action.
pub fn read_embedding_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: String| Error::Ingestion { path: path.into(), line, msg };
    let (hl, header) = lines.next().ok_or_else(|| bad(1, "empty embedding file".into()))?;
    let h: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| bad(hl + 1, format!("header: {e}")))?;
    let [n, d] = h[..] else {
        return Err(bad(hl + 1, "header must be `num_actions d`".into()));
    };
    let mut rows = Vec::with_capacity(n);
    for (i, line) in lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(i + 1, format!("{e}")))?;
        if row.len() != d {
            return Err(bad(i + 1, format!("expected {d} values, got {}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(bad(0, format!("header declares {n} rows, found {}", rows.len())));
    }
    Ok(rows)
}

pub fn write_embedding_file(rows: &[Vec<f64>], path: &Path) -> Result<()> {
    let d = rows.first().map_or(0, Vec::len);
    let mut out = format!("{} {d}\n", rows.len());
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).expect("write to String");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A loaded MovieLens instance.
#[derive(Debug, Clone)]
pub struct MovieLens {
    pub instance: ProblemInstance,
    pub labels: Vec<String>,
    pub group_sizes: Vec<usize>,
    /// MovieLens ids of the actions, in action order.
    pub movie_ids: Vec<u32>,
}

fn top_by_count(counts: &BTreeMap<u32, usize>, n: Option<usize>) -> Vec<u32> {
    let mut ranked: Vec<(u32, usize)> = counts.iter().map(|(k, v)| (*k, *v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if let Some(n) = n {
        ranked.truncate(n);
    }
    let mut ids: Vec<u32> = ranked.into_iter().map(|(k, _)| k).collect();
    ids.sort_unstable();
    ids
}

/// Relative paths in `spec` are resolved against `base_dir`.
pub fn load_movielens(spec: &MovieLensSpec, horizon: usize, noise_std: f64, base_dir: &Path) -> Result<MovieLens> {
    if spec.dim == 0 {
        return Err(Error::InvalidConfig("dim must be positive".into()));
    }
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
    let ratings = read_ratings(&resolve(&spec.ratings_path))?;
    let users = read_users(&resolve(&spec.users_path))?;

    let mut user_counts: BTreeMap<u32, usize> = BTreeMap::new();
    for r in &ratings {
        *user_counts.entry(r.user).or_default() += 1;
    }
    let kept_users: BTreeSet<u32> = top_by_count(&user_counts, spec.max_users).into_iter().collect();
    let mut movie_counts: BTreeMap<u32, usize> = BTreeMap::new();
    for r in ratings.iter().filter(|r| kept_users.contains(&r.user)) {
        *movie_counts.entry(r.movie).or_default() += 1;
    }
    let movie_ids = top_by_count(&movie_counts, spec.max_movies);
    let movie_index: BTreeMap<u32, usize> = movie_ids.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let user_ids: Vec<u32> = kept_users.iter().copied().collect();
    let user_index: BTreeMap<u32, usize> = user_ids.iter().enumerate().map(|(i, u)| (*u, i)).collect();

    let entries: Vec<(usize, usize, f64)> = ratings
        .iter()
        .filter_map(|r| Some((*user_index.get(&r.user)?, *movie_index.get(&r.movie)?, r.rating)))
        .collect();
    let sparse = SparseRatings { num_users: user_ids.len(), num_movies: movie_ids.len(), entries };

    let known: BTreeSet<u32> = users.iter().map(|u| u.user).collect();
    if let Some(u) = user_ids.iter().find(|u| !known.contains(u)) {
        return Err(Error::InvalidInput(format!("user {u} has ratings but no attribute row")));
    }
    let kept_records: Vec<UserRecord> = users.iter().filter(|u| kept_users.contains(&u.user)).cloned().collect();
    let grouping = group_users(&kept_records, spec)?;

    let (movie_emb, user_ctx): (Vec<Vec<f64>>, Option<Vec<Vec<f64>>>) = match &spec.embedding_path {
        Some(p) => {
            if spec.action_mode == ActionMode::UserModulated {
                return Err(Error::InvalidConfig(
                    "user-modulated actions need SVD user factors; drop embedding_path".into(),
                ));
            }
            let all = read_embedding_file(&resolve(p))?;
            let rows = movie_ids
                .iter()
                .map(|m| {
                    all.get(*m as usize - 1).cloned().ok_or_else(|| {
                        Error::InvalidInput(format!("embedding file has no row for movie {m}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if rows[0].len() != spec.dim {
                return Err(Error::InvalidConfig(format!(
                    "embedding file has dimension {} but dim = {}",
                    rows[0].len(),
                    spec.dim
                )));
            }
            (rows, None)
        }
        None => {
            let emb = embed_svd(&sparse, spec.dim)?;
            let ctx = match spec.action_mode {
                ActionMode::Shared => None,
                ActionMode::UserModulated => Some((0..user_ids.len()).map(|i| emb.user_factor(i)).collect()),
            };
            (emb.movie_embeddings(), ctx)
        }
    };

    let target = |r: f64| if spec.rescale_ratings { (r - 1.0) / 4.0 } else { r };
    let records: Vec<RegressionRecord> = sparse
        .entries
        .iter()
        .map(|&(u, m, r)| RegressionRecord {
            action: m,
            context: user_ctx.as_ref().map(|c| c[u].clone()),
            rating: target(r),
        })
        .collect();
    let theta = fit_theta_star(&movie_emb, &records, spec.ridge)?;

    let base = ActionSet::new(movie_emb)?;
    let num_agents = grouping.members.len();
    let profile = match user_ctx {
        None => ActionProfile::Fixed(base),
        Some(contexts) => {
            let schedule = grouping
                .members
                .iter()
                .enumerate()
                .map(|(a, members)| {
                    let mut rng = RngStream::new(spec.seed).with_agent(a).with_purpose(Purpose::UserSchedule).rng();
                    (0..horizon)
                        .map(|_| user_index[&members[rng.random_range(0..members.len())]])
                        .collect()
                })
                .collect();
            ActionProfile::Modulated { base, contexts, schedule }
        }
    };
    let instance = ProblemInstance::new(theta, profile, num_agents, horizon, noise_std)?;
    Ok(MovieLens {
        instance,
        group_sizes: grouping.members.iter().map(Vec::len).collect(),
        labels: grouping.labels,
        movie_ids,
    })
}

/// Shape of a generated MovieLens-format fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub num_users: usize,
    pub num_movies: usize,
    pub ratings_per_user: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec { num_users: 300, num_movies: 400, ratings_per_user: 60, seed: 7 }
    }
}

const RAW_OCCUPATIONS: [&str; 21] = [
    "administrator", "artist", "doctor", "educator", "engineer", "entertainment", "executive",
    "healthcare", "homemaker", "lawyer", "librarian", "marketing", "none", "other", "programmer",
    "retired", "salesman", "scientist", "student", "technician", "writer",
];

const FIXTURE_ZIPS: [&str; 12] = [
    "94043", "10003", "60614", "02139", "98101", "78705", "30329", "48105", "55414", "19104", "90210", "T8H1N",
];

/// Writes `u.data` and `u.user` with low-rank rating structure and
/// popularity-skewed movie choice. Deterministic in `spec`.
pub fn write_ml100k_fixture(dir: &Path, spec: &FixtureSpec) -> Result<()> {
    use rand_distr::{Distribution, StandardNormal};
    fn normal(rng: &mut crate::rng::StreamRng) -> f64 {
        StandardNormal.sample(rng)
    }
    if spec.ratings_per_user == 0 || spec.ratings_per_user > spec.num_movies {
        return Err(Error::InvalidConfig("ratings_per_user must be in 1..=num_movies".into()));
    }
    let mut rng = RngStream::new(spec.seed).with_purpose(Purpose::Custom(0xF1)).rng();
    const RANK: usize = 3;
    let latent = |n: usize, rng: &mut crate::rng::StreamRng| -> Vec<[f64; RANK]> {
        (0..n)
            .map(|_| std::array::from_fn(|_| normal(rng)))
            .collect()
    };
    let uf = latent(spec.num_users, &mut rng);
    let mf = latent(spec.num_movies, &mut rng);
    let bias: Vec<f64> = (0..spec.num_movies).map(|_| 0.5 * normal(&mut rng)).collect();

    let mut data = String::new();
    let mut users = String::new();
    for u in 0..spec.num_users {
        let mut chosen = BTreeSet::new();
        while chosen.len() < spec.ratings_per_user {
            // popularity skew: low ids are rated more often
            let x: f64 = rng.random();
            chosen.insert(((x * x) * spec.num_movies as f64) as usize);
        }
        for m in chosen {
            let score: f64 = 3.5
                + bias[m]
                + 0.6 * (0..RANK).map(|k| uf[u][k] * mf[m][k]).sum::<f64>()
                + 0.5 * normal(&mut rng);
            let r = score.round().clamp(1.0, 5.0) as u32;
            let ts = 874_000_000 + rng.random_range(0..10_000_000u32);
            writeln!(data, "{}\t{}\t{}\t{}", u + 1, m + 1, r, ts).expect("write to String");
        }
        let age = rng.random_range(10..75u32);
        let gender = if rng.random::<f64>() < 0.7 { "M" } else { "F" };
        let occ = RAW_OCCUPATIONS[rng.random_range(0..RAW_OCCUPATIONS.len())];
        let zip = FIXTURE_ZIPS[rng.random_range(0..FIXTURE_ZIPS.len())];
        writeln!(users, "{}|{}|{}|{}|{}", u + 1, age, gender, occ, zip).expect("write to String");
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join("u.data");
    std::fs::write(&p, data).map_err(|e| Error::io(&p, e))?;
    let p = dir.join("u.user");
    std::fs::write(&p, users).map_err(|e| Error::io(&p, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (tempfile::TempDir, MovieLensSpec) {
        let dir = tempfile::tempdir().unwrap();
        let fx = FixtureSpec { num_users: 80, num_movies: 60, ratings_per_user: 20, seed: 3 };
        write_ml100k_fixture(dir.path(), &fx).unwrap();
        let mut spec = MovieLensSpec::from_dir(dir.path(), Attribute::Gender);
        spec.dim = 5;
        spec.max_movies = Some(30);
        (dir, spec)
    }

    #[test]
    fn gender_agents() {
        let (dir, spec) = fixture();
        let ml = load_movielens(&spec, 16, 1.0, dir.path()).unwrap();
        assert_eq!(ml.labels, vec!["Male", "Female"]);
        assert_eq!(ml.instance.num_agents(), 2);
        let set = ml.instance.action_set(0, 1).unwrap();
        assert_eq!(set.len(), 30);
        assert_eq!(set.dim(), 5);
        assert_eq!(ml.group_sizes.iter().sum::<usize>(), 80);
    }

    #[test]
    fn occupation_has_eight_classes() {
        let mut seen = BTreeSet::new();
        for o in RAW_OCCUPATIONS {
            seen.insert(occupation_class(o).unwrap());
        }
        assert_eq!(seen.len(), 8);
        assert_eq!(occupation_class("astronaut"), None);
        let (dir, mut spec) = fixture();
        spec.attribute = Attribute::Occupation;
        let ml = load_movielens(&spec, 8, 1.0, dir.path()).unwrap();
        assert_eq!(ml.instance.num_agents(), 8);
    }

    #[test]
    fn age_and_geography() {
        assert_eq!(
            age_labels(&default_age_brackets()),
            vec!["<18", "18-24", "25-34", "35-44", "45-49", "50-55", "56+"]
        );
        assert_eq!(age_bracket(17, &default_age_brackets()), 0);
        assert_eq!(age_bracket(18, &default_age_brackets()), 1);
        assert_eq!(age_bracket(80, &default_age_brackets()), 6);
        let (dir, mut spec) = fixture();
        spec.attribute = Attribute::Geography;
        spec.geo_top_k = 4;
        let ml = load_movielens(&spec, 8, 1.0, dir.path()).unwrap();
        assert_eq!(ml.instance.num_agents(), 4);
    }

    #[test]
    fn deterministic_and_modulated() {
        let (dir, mut spec) = fixture();
        spec.action_mode = ActionMode::UserModulated;
        spec.seed = 11;
        let a = load_movielens(&spec, 12, 1.0, dir.path()).unwrap();
        let b = load_movielens(&spec, 12, 1.0, dir.path()).unwrap();
        assert_eq!(a.instance.theta_star(), b.instance.theta_star());
        assert_eq!(a.instance.profile(), b.instance.profile());
        assert!(!a.instance.is_time_invariant());
    }

    #[test]
    fn unknown_attribute_is_config_error() {
        assert!(matches!("zodiac".parse::<Attribute>(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn garbled_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.data");
        std::fs::write(&p, "1\t2\t3\t4\n1\t2\tx\t4\n").unwrap();
        match read_ratings(&p) {
            Err(Error::Ingestion { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fit_examples() {
        // d=1 rows (2,4),(1,2) -> 2
        let emb = vec![vec![2.0], vec![1.0]];
        let rec = |a, r| RegressionRecord { action: a, context: None, rating: r };
        let th = fit_theta_star(&emb, &[rec(0, 4.0), rec(1, 2.0)], None).unwrap();
        assert!((th[0] - 2.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta0: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let emb: Vec<Vec<f64>> = (0..12).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let records: Vec<_> = (0..12).map(|i| rec(i, crate::env::dot(&emb[i], &theta0))).collect();
        let th = fit_theta_star(&emb, &records, None).unwrap();
        for (a, b) in th.iter().zip(&theta0) {
            assert!((a - b).abs() < 1e-8);
        }
        let doubled: Vec<_> = records.iter().chain(records.iter()).cloned().collect();
        let th2 = fit_theta_star(&emb, &doubled, None).unwrap();
        for (a, b) in th.iter().zip(&th2) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_deficient_fit_is_singular() {
        let emb = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let rec = |a, r| RegressionRecord { action: a, context: None, rating: r };
        assert!(matches!(
            fit_theta_star(&emb, &[rec(0, 1.0), rec(1, 2.0)], None),
            Err(Error::SingularDesign { .. })
        ));
        assert!(fit_theta_star(&emb, &[rec(0, 1.0), rec(1, 2.0)], Some(1e-3)).is_ok());
    }

    #[test]
    fn svd_examples() {
        // rank one, d = 1: exact
        let u = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let v = nalgebra::DVector::from_vec(vec![2.0, 1.0, -1.0]);
        let m = &u * v.transpose();
        let sp = SparseRatings::from_dense(&m);
        let (centered, _) = sp.centered_dense();
        let e = embed_svd(&sp, 1).unwrap();
        assert!((e.reconstruct_centered() - &centered).norm() <= 1e-10 * centered.norm().max(1.0));

        // full rank, and sign convention
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DMatrix::from_fn(6, 4, |_, _| rng.random_range(1.0..5.0));
        let sp = SparseRatings::from_dense(&m);
        let (centered, _) = sp.centered_dense();
        let e = embed_svd(&sp, 4).unwrap();
        assert!((e.reconstruct_centered() - &centered).norm() <= 1e-8 * centered.norm());
        for k in 0..4 {
            let col = e.movie_factors.column(k);
            let big = col.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
        assert!(e.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(matches!(embed_svd(&sp, 7), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn embedding_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.txt");
        let rows = vec![vec![0.1, -2.5], vec![3.0, 1e-7]];
        write_embedding_file(&rows, &p).unwrap();
        assert_eq!(read_embedding_file(&p).unwrap(), rows);
        std::fs::write(&p, "2 2\n1 2\n3\n").unwrap();
        assert!(matches!(read_embedding_file(&p), Err(Error::Ingestion { line: 3, .. })));
    }
}
