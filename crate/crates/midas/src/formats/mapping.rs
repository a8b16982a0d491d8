//! SWBD-DAMSL mapping table files, one rule per line:
//!
//! ```text
//! <codes, comma separated> <target> <cluster> <description>
//! ```
//!
//! The target is a tag id (or any spelling the taxonomy resolves), `DROP`,
//! or `UNRESOLVED`.

use std::path::Path;

use midas_core::swda::{MapTarget, MappingRule, MappingTable};
use midas_core::Taxonomy;

use super::{content_lines, escape_field, read_text, unescape_field, FileError};

pub fn render_mapping(table: &MappingTable) -> String {
    let mut out = String::from("# codes\ttarget\tcluster\tdescription\n");
    for r in table.rules() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            escape_field(&r.codes.join(",")),
            escape_field(r.target.as_str()),
            escape_field(&r.cluster),
            escape_field(&r.description)
        ));
    }
    out
}

pub fn parse_mapping(src: &str, origin: &str, taxonomy: &Taxonomy) -> Result<MappingTable, FileError> {
    let mut rules = Vec::new();
    for (n, line) in content_lines(src) {
        if line.starts_with('#') {
            continue;
        }
        let f: Vec<String> = line
            .split('\t')
            .map(unescape_field)
            .collect::<Result<_, _>>()
            .map_err(|e| FileError::parse(origin, n, e))?;
        if f.len() != 4 {
            return Err(FileError::parse(origin, n, format!("expected 4 fields, found {}", f.len())));
        }
        let codes: Vec<String> = f[0].split(',').map(|c| c.trim().to_owned()).filter(|c| !c.is_empty()).collect();
        if codes.is_empty() {
            return Err(FileError::parse(origin, n, "rule has no codes"));
        }
        let target = match f[1].trim() {
            "DROP" => MapTarget::Drop,
            "UNRESOLVED" => MapTarget::Unresolved,
            t => MapTarget::Tag(t.to_owned()),
        };
        rules.push(MappingRule { codes, target, cluster: f[2].clone(), description: f[3].clone() });
    }
    MappingTable::new(rules, taxonomy).map_err(|e| FileError::invalid(origin, e))
}

pub fn read_mapping(path: &Path, taxonomy: &Taxonomy) -> Result<MappingTable, FileError> {
    parse_mapping(&read_text(path)?, &path.display().to_string(), taxonomy)
}
