//! Minimal INI reader: `key = value` lines, `[section]` headers, full-line
//! comments starting with `#` or `;`.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    /// Keys before the first section header.
    pub global: BTreeMap<String, String>,
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Ini {
    /// Parses `text`, collecting one message per malformed line.
    pub fn parse(text: &str) -> Result<Ini, Vec<String>> {
        let mut ini = Ini::default();
        let mut errors = Vec::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                match rest.strip_suffix(']').map(str::trim) {
                    Some(name) if !name.is_empty() => {
                        ini.sections.entry(name.to_string()).or_default();
                        current = Some(name.to_string());
                    }
                    _ => errors.push(format!("line {}: malformed section header `{line}`", i + 1)),
                }
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) if !k.trim().is_empty() => {
                    let map = match &current {
                        Some(s) => ini.sections.get_mut(s).expect("section exists"),
                        None => &mut ini.global,
                    };
                    map.insert(k.trim().to_string(), v.trim().to_string());
                }
                _ => errors.push(format!("line {}: expected `key = value`, got `{line}`", i + 1)),
            }
        }
        if errors.is_empty() {
            Ok(ini)
        } else {
            Err(errors)
        }
    }

    pub fn section(&self, name: &str) -> Option<&BTreeMap<String, String>> {
        self.sections.get(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let ini = Ini::parse("seed = 3\n# note\n[converge]\nh_values = 0.5, 0.25\n\n[model.slow]\nfamily = ou-additive\na=-0.5\n").unwrap();
        assert_eq!(ini.global["seed"], "3");
        assert_eq!(ini.section("converge").unwrap()["h_values"], "0.5, 0.25");
        assert_eq!(ini.section("model.slow").unwrap()["a"], "-0.5");
    }

    #[test]
    fn all_bad_lines_are_reported() {
        let errs = Ini::parse("ok = 1\nnonsense\n[broken\n= 4\n").unwrap_err();
        assert_eq!(errs.len(), 3);
        assert!(errs[0].starts_with("line 2"));
    }

    #[test]
    fn semicolons_inside_values_survive() {
        let ini = Ini::parse("x_grid = 1, 0; 0, 1\n").unwrap();
        assert_eq!(ini.global["x_grid"], "1, 0; 0, 1");
    }
}
