use std::path::Path;

use super::{FieldConfig, SimError};

const SHIPPED: [&str; 5] = [
    include_str!("../../../../fields/field-1.toml"),
    include_str!("../../../../fields/field-2.toml"),
    include_str!("../../../../fields/field-3.toml"),
    include_str!("../../../../fields/field-4.toml"),
    include_str!("../../../../fields/field-5.toml"),
];

/// Parses and validates a field description in TOML.
pub fn parse_field(src: &str) -> Result<FieldConfig, SimError> {
    let config: FieldConfig =
        toml::from_str(src).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    config.check()?;
    Ok(config)
}

pub fn load_field(path: &Path) -> Result<FieldConfig, SimError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| SimError::InvalidConfig(format!("{}: {e}", path.display())))?;
    parse_field(&src)
}

/// The five evaluation fields bundled with the crate.
pub fn shipped_fields() -> Vec<FieldConfig> {
    SHIPPED
        .iter()
        .map(|src| parse_field(src).expect("shipped field is valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Orientation, ZoneKind};

    #[test]
    fn shipped_fields_are_distinct_and_valid() {
        let fields = shipped_fields();
        assert_eq!(fields.len(), 5);
        for (i, f) in fields.iter().enumerate() {
            assert_eq!(f.field_seed_label, format!("field-{}", i + 1));
            assert_eq!(f.zones_of(ZoneKind::Load).count(), 3);
            assert_eq!(f.blocks.len(), 12);
            assert!(f.blocks.iter().any(|b| b.orientation == Orientation::OrangeUp));
        }
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(fields[i].blocks, fields[j].blocks);
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let good = SHIPPED[0];
        for (from, to) in [
            ("target_zone = \"SH1\"", "target_zone = \"SH0\""),
            ("initial_zone = \"L2\"", "initial_zone = \"L9\""),
            ("id = \"U2\"", "id = \"U1\""),
            ("kind = \"StartFinish\"", "kind = \"Load\""),
            ("time_limit = 180.0", "time_limit = -1.0"),
            ("w = 600.0", "w = 0.0"),
        ] {
            assert!(good.contains(from), "{from}");
            let bad = good.replacen(from, to, 1);
            assert!(matches!(parse_field(&bad), Err(SimError::InvalidConfig(_))), "{to}");
        }
        assert!(parse_field("not toml [").is_err());
    }
}
