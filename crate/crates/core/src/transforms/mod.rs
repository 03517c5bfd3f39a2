//! Time series to graph transformations.
//!
//! Three families are provided: visibility graphs (natural, horizontal and
//! the dual-perspective merge), transition networks over quantile or
//! ordinal-pattern states, and k-NN proximity networks over delay
//! embeddings. [`Transform`] bundles a method with its options and parses
//! the compact names used on the command line, e.g. `wdpvg`,
//! `nvg:direction=ltr,weighting=abs_v`, `mtf:q=10` or `knn:m=3,tau=1,k=5`.

mod proximity;
mod transition;
mod visibility;

use alloc::format;
use alloc::string::{String, ToString};

pub use proximity::{delay_embedding, knn_graph};
pub use transition::{
    mtf_graph, ordinal_states, ordinal_transition_graph, quantile_boundaries, quantile_states,
    transition_graph, TransitionMatrix, AUTO_SPARSIFY_ABOVE, AUTO_TOP_K,
};
pub use visibility::{brute_force_visibility, hvg, nvg, visibility, wdpvg, BRUTE_FORCE_LIMIT};

use crate::error::{Error, Result};
use crate::graph::{TsGraph, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VisibilityKind {
    Natural,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    #[default]
    Undirected,
    /// Edges point forward in time.
    LeftToRight,
    /// Edges point from the higher to the lower value; equal values fall
    /// back to left-to-right.
    TopToBottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VisibilityOptions {
    pub direction: Direction,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "rule", rename_all = "snake_case"))]
pub enum StateRule {
    Quantile { num_states: usize },
    Ordinal { order: usize, delay: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sparsify {
    /// Dense up to [`AUTO_SPARSIFY_ABOVE`] points, top-[`AUTO_TOP_K`] beyond.
    #[default]
    Auto,
    None,
    /// Keep edges with weight `>= eps`.
    Threshold(f64),
    /// Keep the `k` strongest outgoing edges per node.
    TopK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransitionOptions {
    pub rule: StateRule,
    pub sparsify: Sparsify,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProximityOptions {
    pub embed_dim: usize,
    pub delay: usize,
    pub k: usize,
}

impl Default for ProximityOptions {
    fn default() -> Self {
        ProximityOptions { embed_dim: 3, delay: 1, k: 5 }
    }
}

pub const DEFAULT_QUANTILES: usize = 10;
pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_DELAY: usize = 1;

/// A transformation method together with its options.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "method", rename_all = "snake_case"))]
pub enum Transform {
    Nvg(VisibilityOptions),
    Hvg(VisibilityOptions),
    Wdpvg(VisibilityOptions),
    Transition(TransitionOptions),
    Knn(ProximityOptions),
}

impl Default for Transform {
    /// Dual-perspective visibility graph with Euclidean weights.
    fn default() -> Self {
        Transform::Wdpvg(VisibilityOptions { direction: Direction::Undirected, weighting: Weighting::Euclidean })
    }
}

impl Transform {
    pub fn apply(&self, series: &[f64]) -> Result<TsGraph> {
        match self {
            Transform::Nvg(o) => nvg(series, o),
            Transform::Hvg(o) => hvg(series, o),
            Transform::Wdpvg(o) => wdpvg(series, o),
            Transform::Transition(o) => transition_graph(series, o),
            Transform::Knn(o) => knn_graph(series, o),
        }
    }

    /// Whether the produced edges carry meaningful (non-unit) weights.
    pub fn is_weighted(&self) -> bool {
        match self {
            Transform::Nvg(o) | Transform::Hvg(o) | Transform::Wdpvg(o) => o.weighting != Weighting::None,
            Transform::Transition(_) | Transform::Knn(_) => true,
        }
    }

    /// Parses `method[:key=value,...]`.
    ///
    /// Visibility methods (`nvg`, `hvg`, `wdpvg`) take `direction`
    /// (`undirected`, `ltr`, `ttb`) and `weighting`; `wdpvg` defaults to
    /// Euclidean weights. `mtf` takes `q` and `sparsify` (`auto`, `none`,
    /// `topN`, `thrX`); `ordinal` takes `m`, `tau` and `sparsify`; `knn`
    /// takes `m`, `tau` and `k`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (method, args) = match spec.split_once(':') {
            Some((m, a)) => (m.trim(), a),
            None => (spec.trim(), ""),
        };
        let mut kv = alloc::vec::Vec::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(spec, &format!("expected key=value, got {part:?}")))?;
            kv.push((k.trim(), v.trim()));
        }
        let get = |key: &str| kv.iter().rev().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let num = |key: &str, default: usize| -> Result<usize> {
            get(key).map_or(Ok(default), |v| v.parse().map_err(|_| bad(spec, &format!("{key} must be an integer"))))
        };
        let known: &[&str] = match method {
            "nvg" | "hvg" | "wdpvg" => &["direction", "weighting"],
            "mtf" => &["q", "sparsify"],
            "ordinal" => &["m", "tau", "sparsify"],
            "knn" => &["m", "tau", "k"],
            _ => return Err(bad(spec, "unknown method")),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !known.contains(k)) {
            return Err(bad(spec, &format!("unknown option {k:?}")));
        }
        let vis = |default_weighting: Weighting| -> Result<VisibilityOptions> {
            let direction = match get("direction") {
                None | Some("undirected") => Direction::Undirected,
                Some("ltr") | Some("left_to_right") => Direction::LeftToRight,
                Some("ttb") | Some("top_to_bottom") => Direction::TopToBottom,
                Some(other) => return Err(bad(spec, &format!("unknown direction {other:?}"))),
            };
            let weighting = match get("weighting") {
                None => default_weighting,
                Some(w) => Weighting::from_name(w)
                    .filter(|w| *w != Weighting::Transition)
                    .ok_or_else(|| bad(spec, &format!("unknown weighting {w:?}")))?,
            };
            Ok(VisibilityOptions { direction, weighting })
        };
        let sparsify = || -> Result<Sparsify> {
            match get("sparsify") {
                None | Some("auto") => Ok(Sparsify::Auto),
                Some("none") => Ok(Sparsify::None),
                Some(s) if s.starts_with("top") => s[3..]
                    .parse()
                    .map(Sparsify::TopK)
                    .map_err(|_| bad(spec, "topN needs an integer")),
                Some(s) if s.starts_with("thr") => s[3..]
                    .parse()
                    .map(Sparsify::Threshold)
                    .map_err(|_| bad(spec, "thrX needs a number")),
                Some(other) => Err(bad(spec, &format!("unknown sparsify mode {other:?}"))),
            }
        };
        Ok(match method {
            "nvg" => Transform::Nvg(vis(Weighting::None)?),
            "hvg" => Transform::Hvg(vis(Weighting::None)?),
            "wdpvg" => Transform::Wdpvg(vis(Weighting::Euclidean)?),
            "mtf" => Transform::Transition(TransitionOptions {
                rule: StateRule::Quantile { num_states: num("q", DEFAULT_QUANTILES)? },
                sparsify: sparsify()?,
            }),
            "ordinal" => Transform::Transition(TransitionOptions {
                rule: StateRule::Ordinal { order: num("m", DEFAULT_ORDER)?, delay: num("tau", DEFAULT_DELAY)? },
                sparsify: sparsify()?,
            }),
            "knn" => {
                let d = ProximityOptions::default();
                Transform::Knn(ProximityOptions {
                    embed_dim: num("m", d.embed_dim)?,
                    delay: num("tau", d.delay)?,
                    k: num("k", d.k)?,
                })
            }
            _ => unreachable!("method checked above"),
        })
    }

    /// Canonical name that [`Transform::parse`] maps back to `self`.
    pub fn name(&self) -> String {
        let vis = |m: &str, o: &VisibilityOptions| {
            let dir = match o.direction {
                Direction::Undirected => "undirected",
                Direction::LeftToRight => "ltr",
                Direction::TopToBottom => "ttb",
            };
            format!("{m}:direction={dir},weighting={}", o.weighting.name())
        };
        let sp = |s: Sparsify| match s {
            Sparsify::Auto => "auto".to_string(),
            Sparsify::None => "none".to_string(),
            Sparsify::TopK(k) => format!("top{k}"),
            Sparsify::Threshold(e) => format!("thr{e}"),
        };
        match self {
            Transform::Nvg(o) => vis("nvg", o),
            Transform::Hvg(o) => vis("hvg", o),
            Transform::Wdpvg(o) => vis("wdpvg", o),
            Transform::Transition(TransitionOptions { rule: StateRule::Quantile { num_states }, sparsify }) => {
                format!("mtf:q={num_states},sparsify={}", sp(*sparsify))
            }
            Transform::Transition(TransitionOptions { rule: StateRule::Ordinal { order, delay }, sparsify }) => {
                format!("ordinal:m={order},tau={delay},sparsify={}", sp(*sparsify))
            }
            Transform::Knn(o) => format!("knn:m={},tau={},k={}", o.embed_dim, o.delay, o.k),
        }
    }
}

fn bad(spec: &str, why: &str) -> Error {
    Error::InvalidConfig(format!("transform {spec:?}: {why}"))
}
