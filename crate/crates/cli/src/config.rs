//! Flat `key = value` config files. Keys are flag names without the leading
//! dashes; flags given on the command line override them.

use std::path::Path;

use serde_json::Value;

pub use cbo_core::flat_config::parse;

/// Command-line arguments equivalent to the config entries. Booleans become
/// bare flags.
pub fn to_args(entries: &[(String, String)]) -> Vec<String> {
    let mut args = Vec::new();
    for (key, value) in entries {
        match value.as_str() {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => args.push(format!("--{key}={value}")),
        }
    }
    args
}

/// Splits `--config FILE` out of the arguments after the subcommand.
pub fn take_config_flag(args: &mut Vec<String>) -> Option<String> {
    let pos = args.iter().position(|a| a == "--config" || a.starts_with("--config="))?;
    let flag = args.remove(pos);
    if let Some(path) = flag.strip_prefix("--config=") {
        return Some(path.to_string());
    }
    if pos < args.len() {
        Some(args.remove(pos))
    } else {
        Some(String::new())
    }
}

pub fn read(path: &Path) -> std::io::Result<String> {
    std::fs::read_to_string(path)
}

/// Renders a serialized argument struct as config lines, with keys in the
/// kebab-case flag spelling.
pub fn render(command: &str, value: &Value) -> String {
    let mut out = format!("# cbo {command}\n");
    if let Value::Object(map) = value {
        for (key, v) in map {
            let text = match v {
                Value::Null => continue,
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{} = {}\n", key.replace('_', "-"), text));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_converts() {
        let text = "# comment\n\nd = 2\na=1.5,0\nverbose = true\nquiet = false\n";
        let entries = parse(text).unwrap();
        assert_eq!(to_args(&entries), ["--d=2", "--a=1.5,0", "--verbose"]);
    }

    #[test]
    fn splits_config_flag() {
        let mut args: Vec<String> = ["--d", "1", "--config", "x.cfg", "--a", "1,0"].map(String::from).to_vec();
        assert_eq!(take_config_flag(&mut args).as_deref(), Some("x.cfg"));
        assert_eq!(args, ["--d", "1", "--a", "1,0"]);
        let mut args: Vec<String> = vec!["--config=y.cfg".into()];
        assert_eq!(take_config_flag(&mut args).as_deref(), Some("y.cfg"));
        assert!(args.is_empty());
    }

    #[test]
    fn renders_round_trip() {
        let v = serde_json::json!({"d": 2, "a": "1.5,0", "max_iter": 500, "eps_sep": null});
        let text = render("membership", &v);
        assert_eq!(text, "# cbo membership\na = 1.5,0\nd = 2\nmax-iter = 500\n");
        assert_eq!(parse(&text).unwrap().len(), 3);
    }
}
