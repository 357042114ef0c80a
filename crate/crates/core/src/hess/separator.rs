use thiserror::Error;

use super::SeparatorCut;
use crate::connectivity::{components, reachable_avoiding, ConnectivityMatrix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeparatorError {
    #[error("region {0} is not a member of the group")]
    NotMember(usize),
    #[error("region {region} is connected to medoid {medoid} inside the group")]
    NotSeparated { region: usize, medoid: usize },
}

/// Separator cut for `region`, which sits in a fragment of the group
/// `members` that does not contain `medoid`.
///
/// Starts from the outer boundary of the fragment (neighbours outside the
/// fragment, excluding `region` and `medoid`) and greedily drops boundary
/// regions in ascending order while `region` stays cut off from `medoid`.
/// None of the returned separator regions belongs to the group, so the
/// assignment that produced the fragment violates the cut.
pub fn find_separator(
    region: usize,
    medoid: usize,
    members: &[usize],
    c: &ConnectivityMatrix,
) -> Result<SeparatorCut, SeparatorError> {
    for &r in [region, medoid].iter() {
        if !members.contains(&r) {
            return Err(SeparatorError::NotMember(r));
        }
    }
    let fragment = components(members, c)
        .into_iter()
        .find(|comp| comp.binary_search(&region).is_ok())
        .expect("region is a member");
    if fragment.binary_search(&medoid).is_ok() {
        return Err(SeparatorError::NotSeparated { region, medoid });
    }

    let mut in_fragment = vec![false; c.len()];
    for &f in &fragment {
        in_fragment[f] = true;
    }
    let mut blocked = vec![false; c.len()];
    for &f in &fragment {
        for &v in c.neighbors(f) {
            if !in_fragment[v] && v != region && v != medoid {
                blocked[v] = true;
            }
        }
    }
    debug_assert!(!reachable_avoiding(c, region, medoid, &blocked));

    for v in 0..c.len() {
        if !blocked[v] {
            continue;
        }
        blocked[v] = false;
        if reachable_avoiding(c, region, medoid, &blocked) {
            blocked[v] = true;
        }
    }
    let separator = (0..c.len()).filter(|&v| blocked[v]).collect();
    Ok(SeparatorCut { region, medoid, separator })
}
