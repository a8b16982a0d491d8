//! Declarative scheme files and the documentation table.
//!
//! One entry per line, tab separated, parents before children:
//!
//! ```text
//! node  <kind> <name> <parent or -> <display name> <description> <example>
//! alias <alias> <tag id>
//! exclusive <group> <group>
//! ```
//!
//! Lines starting with `#` are comments. Fields escape `\t`, `\n`, `\r` and
//! `\\`.

use std::path::Path;

use midas_core::taxonomy::{NodeKind, NodeSpec, SchemeSpec};
use midas_core::Taxonomy;

use super::{content_lines, escape_field, read_text, unescape_field, FileError};

const HEADER: &str = "# midas scheme";

pub fn render_scheme(spec: &SchemeSpec) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for n in &spec.nodes {
        let fields = [
            n.kind.as_str(),
            &n.name,
            n.parent.as_deref().unwrap_or("-"),
            &n.display_name,
            &n.description,
            &n.example,
        ];
        out.push_str("node");
        for f in fields {
            out.push('\t');
            out.push_str(&escape_field(f));
        }
        out.push('\n');
    }
    for (alias, tag) in &spec.aliases {
        out.push_str(&format!("alias\t{}\t{}\n", escape_field(alias), escape_field(tag)));
    }
    for (a, b) in &spec.exclusive {
        out.push_str(&format!("exclusive\t{}\t{}\n", escape_field(a), escape_field(b)));
    }
    out
}

pub fn parse_scheme_spec(src: &str, origin: &str) -> Result<SchemeSpec, FileError> {
    let mut spec = SchemeSpec::default();
    for (n, line) in content_lines(src) {
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line
            .split('\t')
            .map(unescape_field)
            .collect::<Result<_, _>>()
            .map_err(|e| FileError::parse(origin, n, e))?;
        let want = |k: usize| {
            if fields.len() == k {
                Ok(())
            } else {
                Err(FileError::parse(origin, n, format!("`{}` entry needs {} fields, found {}", fields[0], k, fields.len())))
            }
        };
        match fields[0].as_str() {
            "node" => {
                want(7)?;
                let kind = NodeKind::parse(&fields[1])
                    .ok_or_else(|| FileError::parse(origin, n, format!("unknown node kind `{}`", fields[1])))?;
                spec.nodes.push(NodeSpec {
                    kind,
                    name: fields[2].clone(),
                    parent: (fields[3] != "-").then(|| fields[3].clone()),
                    display_name: fields[4].clone(),
                    description: fields[5].clone(),
                    example: fields[6].clone(),
                });
            }
            "alias" => {
                want(3)?;
                spec.aliases.push((fields[1].clone(), fields[2].clone()));
            }
            "exclusive" => {
                want(3)?;
                spec.exclusive.push((fields[1].clone(), fields[2].clone()));
            }
            other => return Err(FileError::parse(origin, n, format!("unknown entry type `{other}`"))),
        }
    }
    Ok(spec)
}

/// Parses and builds the taxonomy; structural errors name the node path.
pub fn parse_scheme(src: &str, origin: &str) -> Result<Taxonomy, FileError> {
    let spec = parse_scheme_spec(src, origin)?;
    Taxonomy::from_spec(spec).map_err(|e| FileError::invalid(origin, e))
}

pub fn read_scheme(path: &Path) -> Result<Taxonomy, FileError> {
    parse_scheme(&read_text(path)?, &path.display().to_string())
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

/// Markdown table of every tag with its tree position, description and
/// example.
pub fn render_doc_table(taxonomy: &Taxonomy) -> String {
    let mut out = String::from("| Tag | Name | Path | Description | Example |\n|---|---|---|---|---|\n");
    for t in taxonomy.tags() {
        let path = t.path[..t.path.len() - 1].join(" > ");
        out.push_str(&format!(
            "| `{}` | {} | {} | {} | {} |\n",
            t.id,
            cell(&t.display_name),
            cell(&path),
            cell(&t.description),
            cell(&t.example)
        ));
    }
    out
}
