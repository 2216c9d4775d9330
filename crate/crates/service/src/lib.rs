//! Stateless HTTP access to tiles, membership verdicts, rays and centers.
//!
//! Every response is a pure function of the request URL and the service
//! config, whose hash is reported by `/api/v1/version`.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use cbo_core::family::{monic_roots, MonicOdd, Unicritical};
use cbo_core::flat_config;
use cbo_core::loci::{membership_pm, select_branch, PmParams};
use cbo_core::pcf::{
    match_center, solve_center_bicritical, solve_center_unicritical, solve_cut_point,
    solve_misiurewicz_unicritical,
};
use cbo_core::rays::{trace_ray, Angle, RayParams};
use cbo_core::render::{self, Coloring, DynamicalMap, Plane, RenderJob, Viewport};
use cbo_core::C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceConfig {
    pub listen: String,
    /// Concurrent computations and render threads.
    pub workers: usize,
    /// Tile edge in pixels.
    pub tile_px: u32,
    pub max_zoom: u32,
    pub max_iter_limit: usize,
    /// Wall-clock budget for ray, membership and center requests.
    pub compute_budget_ms: u64,
    /// Width of the root viewport of dynamical planes, centered at 0.
    pub dyn_width: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            tile_px: 256,
            max_zoom: 40,
            max_iter_limit: 100_000,
            compute_budget_ms: 10_000,
            dyn_width: 6.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Parse(#[from] flat_config::ParseError),
    #[error("{key}: {message}")]
    Value { key: String, message: String },
}

impl ServiceConfig {
    /// Applies `key = value` entries in the CLI config format.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (key, value) in flat_config::parse(text)? {
            let bad = |m: String| ConfigError::Value { key: key.clone(), message: m };
            let num = |v: &str| v.parse::<u64>().map_err(|e| bad(e.to_string()));
            match key.as_str() {
                "listen" => self.listen = value.clone(),
                "workers" => self.workers = num(&value)?.max(1) as usize,
                "tile-px" => self.tile_px = num(&value)?.clamp(1, 4096) as u32,
                "max-zoom" => self.max_zoom = num(&value)?.min(60) as u32,
                "max-iter-limit" => self.max_iter_limit = num(&value)? as usize,
                "compute-budget-ms" => self.compute_budget_ms = num(&value)?,
                "dyn-width" => {
                    self.dyn_width = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
                }
                _ => return Err(bad("unknown key".into())),
            }
        }
        Ok(())
    }

    /// Hex digest identifying every setting that can change a response.
    pub fn version_hash(&self) -> String {
        let relevant = (self.tile_px, self.max_zoom, self.max_iter_limit, self.compute_budget_ms, self.dyn_width);
        hex::encode(Sha256::digest(serde_json::to_vec(&relevant).unwrap()))
    }
}

/// Fixed root viewport of a parameter plane: `(center, width)`.
pub fn parameter_root(plane: &Plane, dyn_width: f64) -> (C64, f64) {
    match plane {
        Plane::ParameterMultibrot { degree: 2 } => (C64::new(-0.25, 0.0), 4.0),
        Plane::ParameterMultibrot { .. } => (C64::new(0.0, 0.0), 4.5),
        Plane::ParameterCbo { .. } => (C64::new(0.0, 0.0), 6.0),
        Plane::ParameterMbo { .. } => (C64::new(0.0, 0.0), 3.0),
        Plane::Dynamical { .. } => (C64::new(0.0, 0.0), dyn_width),
    }
}

/// Viewport of tile `(x, y)` at `zoom`; row 0 is the top.
pub fn tile_viewport(root: (C64, f64), zoom: u32, x: u64, y: u64, px: u32) -> Viewport {
    let (center, width) = root;
    let n = (1u64 << zoom) as f64;
    let tw = width / n;
    let cx = center.re - width / 2.0 + (x as f64 + 0.5) * tw;
    let cy = center.im + width / 2.0 - (y as f64 + 0.5) * tw;
    Viewport { center: C64::new(cx, cy), width: tw, px_w: px, px_h: px }
}

struct AppState {
    config: ServiceConfig,
    version: String,
    permits: Semaphore,
    pool: rayon::ThreadPool,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Unprocessable(String),
    Timeout,
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Timeout => (StatusCode::GATEWAY_TIMEOUT, "compute budget exceeded".to_string()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad(e: impl ToString) -> ApiError {
    ApiError::BadRequest(e.to_string())
}

impl AppState {
    /// Runs `f` on the blocking pool under a permit, inside the render pool.
    async fn compute<T, F>(self: &Arc<Self>, budget: Option<Duration>, f: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce() -> T + Send + 'static,
    {
        let _permit = self.permits.acquire().await.map_err(|e| ApiError::Internal(e.to_string()))?;
        let state = self.clone();
        let task = tokio::task::spawn_blocking(move || state.pool.install(f));
        let joined = match budget {
            Some(b) => tokio::time::timeout(b, task).await.map_err(|_| ApiError::Timeout)?,
            None => task.await,
        };
        joined.map_err(|e| ApiError::Internal(e.to_string()))
    }

    fn budget(&self) -> Option<Duration> {
        Some(Duration::from_millis(self.config.compute_budget_ms))
    }
}

pub fn app(config: ServiceConfig) -> Router {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .expect("render pool");
    let state = Arc::new(AppState {
        version: config.version_hash(),
        permits: Semaphore::new(config.workers),
        pool,
        config,
    });
    Router::new()
        .route("/api/v1/version", get(version))
        .route("/api/v1/locus-tile", get(locus_tile))
        .route("/api/v1/dyn-tile", get(dyn_tile))
        .route("/api/v1/membership", get(membership))
        .route("/api/v1/ray", get(ray))
        .route("/api/v1/center", get(center))
        .with_state(state)
}

#[derive(Serialize)]
struct VersionBody<'a> {
    service: &'static str,
    version: &'static str,
    config: &'a str,
}

async fn version(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(
        serde_json::to_value(VersionBody {
            service: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: &state.version,
        })
        .unwrap(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ImageFormat {
    Ppm,
    Png,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ColoringParam {
    Binary,
    Smooth,
    Verdict,
}

impl From<ColoringParam> for Coloring {
    fn from(c: ColoringParam) -> Self {
        match c {
            ColoringParam::Binary => Coloring::Binary,
            ColoringParam::Smooth => Coloring::SmoothPotential,
            ColoringParam::Verdict => Coloring::PmVerdictOverlay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LocusFamily {
    Multibrot,
    Cbo,
    Mbo,
}

fn default_max_iter() -> usize {
    500
}

fn default_coloring() -> ColoringParam {
    ColoringParam::Binary
}

fn default_format() -> ImageFormat {
    ImageFormat::Png
}

/// Tile address and rendering options shared by both tile routes. Query
/// strings cannot use `serde(flatten)` with numeric fields, so the routes
/// repeat these fields and convert.
#[derive(Debug)]
struct TileQuery {
    z: u32,
    x: u64,
    y: u64,
    max_iter: usize,
    coloring: ColoringParam,
    format: ImageFormat,
}

macro_rules! tile_query {
    ($q:expr) => {
        TileQuery { z: $q.z, x: $q.x, y: $q.y, max_iter: $q.max_iter, coloring: $q.coloring, format: $q.format }
    };
}

#[derive(Debug, Deserialize)]
struct LocusTileQuery {
    family: LocusFamily,
    /// The multibrot family has degree `d + 1`.
    d: u32,
    z: u32,
    x: u64,
    y: u64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default = "default_coloring")]
    coloring: ColoringParam,
    #[serde(default = "default_format")]
    format: ImageFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DynFamily {
    Unicritical,
    BicriticalOdd,
    MonicOdd,
}

#[derive(Debug, Deserialize)]
struct DynTileQuery {
    family: DynFamily,
    d: u32,
    re: f64,
    im: f64,
    z: u32,
    x: u64,
    y: u64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default = "default_coloring")]
    coloring: ColoringParam,
    #[serde(default = "default_format")]
    format: ImageFormat,
}

#[derive(Serialize)]
struct ResolvedTile<'a> {
    job: &'a RenderJob,
    format: &'static str,
    config: &'a str,
}

async fn serve_tile(
    state: Arc<AppState>,
    headers: HeaderMap,
    plane: Plane,
    q: TileQuery,
) -> ApiResult<Response> {
    let cfg = &state.config;
    if q.z > cfg.max_zoom {
        return Err(ApiError::Unprocessable(format!("zoom {} exceeds {}", q.z, cfg.max_zoom)));
    }
    let n = 1u64 << q.z;
    if q.x >= n || q.y >= n {
        return Err(ApiError::Unprocessable(format!("tile ({}, {}) outside zoom {}", q.x, q.y, q.z)));
    }
    if q.max_iter == 0 || q.max_iter > cfg.max_iter_limit {
        return Err(bad(format!("max_iter must lie in 1..={}", cfg.max_iter_limit)));
    }
    let root = parameter_root(&plane, cfg.dyn_width);
    let job = RenderJob {
        plane,
        viewport: tile_viewport(root, q.z, q.x, q.y, cfg.tile_px),
        max_iter: q.max_iter,
        escape_radius: None,
        coloring: q.coloring.into(),
        supersample: 1,
    };
    job.validate().map_err(bad)?;
    let (format, mime) = match q.format {
        ImageFormat::Ppm => ("ppm", "image/x-portable-pixmap"),
        ImageFormat::Png => ("png", "image/png"),
    };
    let resolved = serde_json::to_vec(&ResolvedTile { job: &job, format, config: &state.version }).unwrap();
    let etag = format!("\"{}\"", hex::encode(Sha256::digest(resolved)));
    if headers.get(header::IF_NONE_MATCH).is_some_and(|v| v.as_bytes() == etag.as_bytes()) {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response());
    }
    let want_png = q.format == ImageFormat::Png;
    let body = state
        .compute(None, move || -> Result<Vec<u8>, String> {
            let out = render::render(&job).map_err(|e| e.to_string())?;
            if want_png {
                render::png_bytes(&out.image).map_err(|e| e.to_string())
            } else {
                Ok(render::ppm_bytes(&out.image))
            }
        })
        .await?
        .map_err(ApiError::Internal)?;
    let mut response = body.into_response();
    let h = response.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(mime));
    h.insert(header::ETAG, HeaderValue::from_str(&etag).unwrap());
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static("public, max-age=31536000, immutable"));
    Ok(response)
}

async fn locus_tile(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Query<LocusTileQuery>,
) -> ApiResult<Response> {
    if q.d == 0 {
        return Err(bad("d must be positive"));
    }
    let plane = match q.family {
        LocusFamily::Multibrot => Plane::ParameterMultibrot { degree: q.d + 1 },
        LocusFamily::Cbo => Plane::ParameterCbo { d: q.d },
        LocusFamily::Mbo => Plane::ParameterMbo { d: q.d },
    };
    serve_tile(state, headers, plane, tile_query!(q)).await
}

async fn dyn_tile(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Query<DynTileQuery>,
) -> ApiResult<Response> {
    let p = C64::new(q.re, q.im);
    if q.d == 0 || !(p.re.is_finite() && p.im.is_finite()) {
        return Err(bad("d must be positive and the parameter finite"));
    }
    let map = match q.family {
        DynFamily::Unicritical => DynamicalMap::Unicritical { d: q.d, c: p },
        DynFamily::BicriticalOdd => DynamicalMap::BicriticalOdd { d: q.d, a: p },
        DynFamily::MonicOdd => DynamicalMap::MonicOdd { d: q.d, s: p },
    };
    if q.coloring == ColoringParam::Verdict {
        return Err(bad("verdict coloring applies to the cbo parameter plane"));
    }
    serve_tile(state, headers, Plane::Dynamical { map }, tile_query!(q)).await
}

#[derive(Debug, Deserialize)]
struct MembershipQuery {
    d: u32,
    a_re: f64,
    a_im: f64,
    orbit_len: Option<usize>,
    max_iter: Option<usize>,
    eps0: Option<f64>,
    eps_sep: Option<f64>,
}

async fn membership(
    State(state): State<Arc<AppState>>,
    Query(q): Query<MembershipQuery>,
) -> ApiResult<Json<serde_json::Value>> {
    let defaults = PmParams::default();
    let params = PmParams {
        orbit_len: q.orbit_len.unwrap_or(defaults.orbit_len),
        max_iter: q.max_iter.unwrap_or(defaults.max_iter).min(state.config.max_iter_limit),
        eps0: q.eps0.unwrap_or(defaults.eps0),
        eps_sep: q.eps_sep,
        ..defaults
    };
    let a = C64::new(q.a_re, q.a_im);
    let d = q.d;
    let verdict = state.compute(state.budget(), move || membership_pm(a, d, &params)).await?.map_err(bad)?;
    Ok(Json(serde_json::to_value(verdict).unwrap()))
}

#[derive(Debug, Deserialize)]
struct RayQuery {
    d: u32,
    angle: Angle,
    a_re: Option<f64>,
    a_im: Option<f64>,
    s_re: Option<f64>,
    s_im: Option<f64>,
    c_re: Option<f64>,
    c_im: Option<f64>,
    eta: Option<f64>,
}

fn pair(re: Option<f64>, im: Option<f64>) -> Option<C64> {
    match (re, im) {
        (None, None) => None,
        (re, im) => Some(C64::new(re.unwrap_or(0.0), im.unwrap_or(0.0))),
    }
}

enum RayTarget {
    Unicritical(Unicritical<f64>),
    Monic(MonicOdd<f64>),
}

async fn ray(State(state): State<Arc<AppState>>, Query(q): Query<RayQuery>) -> ApiResult<Json<serde_json::Value>> {
    let params = RayParams { eta: q.eta.unwrap_or(RayParams::default().eta), ..RayParams::default() };
    params.validate().map_err(bad)?;
    let (d, a, s, c) = (q.d, pair(q.a_re, q.a_im), pair(q.s_re, q.s_im), pair(q.c_re, q.c_im));
    let angle = q.angle;
    let trace = state
        .compute(state.budget(), move || -> ApiResult<_> {
            let target = match (c, s, a) {
                (Some(c), None, None) => RayTarget::Unicritical(Unicritical::new(d, c).map_err(bad)?),
                (None, Some(s), _) => RayTarget::Monic(MonicOdd::from_s(d, s).map_err(bad)?),
                (None, None, Some(a)) => {
                    let s = match select_branch(a, d, &params).map_err(bad)? {
                        Some(s) => s,
                        None => monic_roots(d, a).map_err(bad)?[0],
                    };
                    RayTarget::Monic(MonicOdd::from_root(d, a, s).map_err(bad)?)
                }
                _ => return Err(bad("give exactly one of a, s or c")),
            };
            match target {
                RayTarget::Unicritical(m) => trace_ray(&m, &angle, &params),
                RayTarget::Monic(m) => trace_ray(&m, &angle, &params),
            }
            .map_err(|e| ApiError::Unprocessable(e.to_string()))
        })
        .await??;
    Ok(Json(serde_json::to_value(trace).unwrap()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CenterFamily {
    Multibrot,
    Cbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum CenterKindParam {
    #[default]
    Center,
    CutPoint,
    Misiurewicz,
    /// The unicritical center matching a bicritical odd center.
    Match,
}

#[derive(Debug, Deserialize)]
struct CenterQuery {
    family: CenterFamily,
    d: u32,
    #[serde(default)]
    kind: CenterKindParam,
    period: Option<u32>,
    preperiod: Option<u32>,
    seed_re: f64,
    seed_im: f64,
}

async fn center(State(state): State<Arc<AppState>>, Query(q): Query<CenterQuery>) -> ApiResult<Json<serde_json::Value>> {
    if q.d == 0 {
        return Err(bad("d must be positive"));
    }
    let seed = C64::new(q.seed_re, q.seed_im);
    let period = q.period.ok_or_else(|| bad("period is required"))?;
    let unprocessable = |e: cbo_core::pcf::PcfError| ApiError::Unprocessable(e.to_string());
    let (family, kind, d, preperiod) = (q.family, q.kind, q.d, q.preperiod);
    let value = state
        .compute(state.budget(), move || -> ApiResult<serde_json::Value> {
            let spec = match (family, kind) {
                (CenterFamily::Multibrot, CenterKindParam::Center) => solve_center_unicritical(d + 1, period, seed),
                (CenterFamily::Multibrot, CenterKindParam::Misiurewicz) => {
                    let l = preperiod.ok_or_else(|| bad("preperiod is required"))?;
                    solve_misiurewicz_unicritical(d + 1, l, period, seed)
                }
                (CenterFamily::Cbo, CenterKindParam::Center) => solve_center_bicritical(d, period, seed),
                (CenterFamily::Cbo, CenterKindParam::CutPoint) => solve_cut_point(d, period, seed),
                (CenterFamily::Cbo, CenterKindParam::Match) => {
                    let spec = solve_center_bicritical(d, period, seed).map_err(unprocessable)?;
                    let m = match_center(spec.found.unwrap(), d, &RayParams::default()).map_err(unprocessable)?;
                    return Ok(serde_json::json!({ "center": spec, "match": m }));
                }
                _ => return Err(bad("kind does not apply to this family")),
            }
            .map_err(unprocessable)?;
            Ok(serde_json::to_value(spec).unwrap())
        })
        .await??;
    Ok(Json(value))
}
