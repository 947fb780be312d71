//! Example projects shipped with the crate.

use crate::levels::Project;

/// Two robots handing an object over: positions `P1`, `P2` and gripper
/// modes `GM1`, `GM2`, restricted to `GM1 = close && GM2 = open`, with the
/// plan `{t1, t2}` that misses every `pos3` pair.
pub const ROBOTS: &str = include_str!("../data/robots.hcatd");

pub fn robots() -> Project {
    Project::from_json_str(ROBOTS).expect("bundled project is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robots_is_canonical() {
        let p = robots();
        assert_eq!(p.to_json_string(), ROBOTS);
        assert_eq!(p.model().parameters().len(), 4);
        assert_eq!(p.model().restrictions().len(), 1);
        assert_eq!(p.model().enumerate_scenarios().unwrap().len(), 9);
    }
}
