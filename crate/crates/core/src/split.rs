//! Splitting a scene into sub-images free of attractive sub-stroke pairs.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::{PotentialField, SubstrokeFields};
use crate::stroke::{Sign, StrokeScene};

/// Default magnitude below which an interaction score is negligible.
pub const DEFAULT_NEGLIGIBLE: f64 = 0.05 * TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interaction {
    Attractive,
    Repulsive,
    Negligible,
}

/// Mean of `sign_i V_i` along the pixels of `s_j`.
pub fn signed_score(scene: &StrokeScene, fields: &SubstrokeFields, signs: &[Sign], i: u32, j: u32) -> Result<f64> {
    let f = fields.field(i)?;
    let sign = signs.get(i as usize - 1).ok_or(Error::UnknownSubstroke(i))?.value();
    let s = scene.substroke(j).ok_or(Error::UnknownSubstroke(j))?;
    Ok(sign * s.pixels.iter().map(|&p| f[p]).sum::<f64>() / s.len() as f64)
}

/// Attractive when the two cross scores have opposite signs, repulsive when
/// they agree, each only if both exceed `negligible` in magnitude.
pub fn interaction_sign(
    scene: &StrokeScene,
    fields: &SubstrokeFields,
    signs: &[Sign],
    i: u32,
    j: u32,
    negligible: f64,
) -> Result<Interaction> {
    if i == j {
        return Err(Error::Config(format!("interaction of sub-stroke {i} with itself")));
    }
    let a = signed_score(scene, fields, signs, i, j)?;
    let b = signed_score(scene, fields, signs, j, i)?;
    Ok(classify(a, b, negligible))
}

fn classify(a: f64, b: f64, negligible: f64) -> Interaction {
    if a.abs() <= negligible || b.abs() <= negligible {
        Interaction::Negligible
    } else if (a > 0.0) != (b > 0.0) {
        Interaction::Attractive
    } else {
        Interaction::Repulsive
    }
}

/// Overlapping sets of sub-stroke ids and the potential of each.
#[derive(Debug, Clone, PartialEq)]
pub struct SubImageSet {
    pub members: Vec<Vec<u32>>,
    pub fields: Vec<PotentialField>,
}

impl SubImageSet {
    /// `subimage k: id, id, ...` lines.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (k, m) in self.members.iter().enumerate() {
            let ids: Vec<String> = m.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "subimage {k}: {}", ids.join(", "));
        }
        out
    }
}

/// Pairwise classification, indexed by `id - 1`.
pub fn interaction_matrix(
    scene: &StrokeScene,
    fields: &SubstrokeFields,
    signs: &[Sign],
    negligible: f64,
) -> Result<Vec<Vec<Interaction>>> {
    let n = scene.len();
    let mut m = vec![vec![Interaction::Negligible; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let c = interaction_sign(scene, fields, signs, i as u32 + 1, j as u32 + 1, negligible)?;
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    Ok(m)
}

/// Grows one set per seed (longest sub-stroke first) along repulsive edges,
/// never admitting a sub-stroke attractive to a current member. Duplicate
/// sets are dropped. Without any attractive pair the whole scene is one
/// sub-image.
pub fn split_by_attraction(
    scene: &StrokeScene,
    fields: &SubstrokeFields,
    signs: &[Sign],
    negligible: f64,
) -> Result<SubImageSet> {
    let n = scene.len();
    let matrix = interaction_matrix(scene, fields, signs, negligible)?;
    let any_attractive = matrix.iter().flatten().any(|&c| c == Interaction::Attractive);
    let members: Vec<Vec<u32>> = if !any_attractive {
        vec![(1..=n as u32).collect()]
    } else {
        let mut seeds: Vec<usize> = (0..n).collect();
        seeds.sort_by_key(|&i| (std::cmp::Reverse(scene.substrokes()[i].len()), i));
        let mut sets: Vec<Vec<u32>> = Vec::new();
        for seed in seeds {
            let mut inside = vec![false; n];
            inside[seed] = true;
            let mut set = vec![seed];
            let mut queue = VecDeque::from([seed]);
            while let Some(cur) = queue.pop_front() {
                for cand in 0..n {
                    if inside[cand] || matrix[cur][cand] != Interaction::Repulsive {
                        continue;
                    }
                    if set.iter().any(|&m| matrix[m][cand] == Interaction::Attractive) {
                        continue;
                    }
                    inside[cand] = true;
                    set.push(cand);
                    queue.push_back(cand);
                }
            }
            let mut ids: Vec<u32> = set.into_iter().map(|i| i as u32 + 1).collect();
            ids.sort_unstable();
            if !sets.contains(&ids) {
                sets.push(ids);
            }
        }
        sets
    };
    let fields = members
        .iter()
        .map(|m| fields.combine_subset(m, signs))
        .collect::<Result<Vec<_>>>()?;
    Ok(SubImageSet { members, fields })
}
