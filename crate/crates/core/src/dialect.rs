//! SQL capability descriptors for the engines the benchmark targets.
//!
//! Generated SQL is standard SQL-99 at heart; engines differ in whether
//! they accept `GROUP BY CUBE`/`ROLLUP` natively, whether `HAVING` may
//! reference a select-list alias, how identifiers are quoted, and how the
//! three column types are spelled. A [`DialectDescriptor`] captures exactly
//! those switches so the DDL and query renderers stay engine-agnostic:
//! anything a dialect cannot express natively is rewritten (grouping
//! operators expand to a union of plain `GROUP BY` blocks; `HAVING`
//! restates the aggregate expression instead of its alias).

/// Identifier quoting style.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentQuoting {
    /// Emit identifiers bare. Generated names are ASCII upper snake case,
    /// so this is safe everywhere.
    None,
    /// `"ident"` (standard).
    DoubleQuote,
    /// `` `ident` `` (MySQL).
    Backtick,
}

/// Capability and spelling profile of one SQL engine.
#[derive(Debug, Clone, PartialEq)]
pub struct DialectDescriptor {
    pub name: String,
    /// Engine accepts `GROUP BY CUBE(...)`.
    pub supports_cube: bool,
    /// Engine accepts `GROUP BY ROLLUP(...)`.
    pub supports_rollup: bool,
    /// `HAVING` may reference a select-list alias.
    pub supports_having_alias: bool,
    pub quoting: IdentQuoting,
    /// Spelling of the integer key type; `None` marks the type unmapped and
    /// makes DDL emission fail for this dialect.
    pub integer_type: Option<String>,
    /// Spelling of the single-precision measure type.
    pub real_type: Option<String>,
    /// Spelling of the fixed-width character type, rendered `{name}(width)`.
    pub char_type: Option<String>,
}

impl DialectDescriptor {
    fn base(name: &str) -> Self {
        DialectDescriptor {
            name: name.to_string(),
            supports_cube: false,
            supports_rollup: false,
            supports_having_alias: false,
            quoting: IdentQuoting::None,
            integer_type: Some("INTEGER".to_string()),
            real_type: Some("REAL".to_string()),
            char_type: Some("CHAR".to_string()),
        }
    }

    /// Pure SQL-99: every construct available. This is the rendering used
    /// in workload files, independent of any engine.
    pub fn sql99() -> Self {
        DialectDescriptor {
            supports_cube: true,
            supports_rollup: true,
            supports_having_alias: true,
            ..Self::base("sql99")
        }
    }

    /// SQLite: no grouping operators; aliases allowed in `HAVING`.
    pub fn sqlite() -> Self {
        DialectDescriptor {
            supports_having_alias: true,
            ..Self::base("sqlite")
        }
    }

    /// PostgreSQL: native CUBE/ROLLUP; `HAVING` may not use aliases.
    pub fn postgres() -> Self {
        DialectDescriptor {
            supports_cube: true,
            supports_rollup: true,
            quoting: IdentQuoting::DoubleQuote,
            ..Self::base("postgres")
        }
    }

    /// MySQL: no CUBE, and its `WITH ROLLUP` suffix syntax is nonstandard
    /// enough that rollups are expanded instead; aliases allowed in
    /// `HAVING`; floats are `FLOAT`.
    pub fn mysql() -> Self {
        DialectDescriptor {
            supports_having_alias: true,
            quoting: IdentQuoting::Backtick,
            real_type: Some("FLOAT".to_string()),
            ..Self::base("mysql")
        }
    }

    /// Dialects selectable by name on the command line.
    pub fn known_names() -> &'static [&'static str] {
        &["sqlite", "postgres", "mysql", "sql99"]
    }

    /// Case-insensitive lookup of a built-in dialect.
    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "sqlite" => Some(Self::sqlite()),
            "postgres" | "postgresql" => Some(Self::postgres()),
            "mysql" => Some(Self::mysql()),
            "sql99" => Some(Self::sql99()),
            _ => None,
        }
    }

    /// Quotes an identifier per this dialect.
    pub fn quote(&self, ident: &str) -> String {
        match self.quoting {
            IdentQuoting::None => ident.to_string(),
            IdentQuoting::DoubleQuote => format!("\"{ident}\""),
            IdentQuoting::Backtick => format!("`{ident}`"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles_hold_their_documented_switches() {
        let sqlite = DialectDescriptor::sqlite();
        assert!(!sqlite.supports_cube && !sqlite.supports_rollup);
        assert!(sqlite.supports_having_alias);

        let pg = DialectDescriptor::postgres();
        assert!(pg.supports_cube && pg.supports_rollup);
        assert!(!pg.supports_having_alias);

        let my = DialectDescriptor::mysql();
        assert!(!my.supports_cube && !my.supports_rollup);
        assert_eq!(my.real_type.as_deref(), Some("FLOAT"));

        let std = DialectDescriptor::sql99();
        assert!(std.supports_cube && std.supports_rollup && std.supports_having_alias);
    }

    #[test]
    fn lookup_is_case_insensitive_and_total_over_known_names() {
        for name in DialectDescriptor::known_names() {
            assert!(DialectDescriptor::by_name(name).is_some());
            assert!(DialectDescriptor::by_name(&name.to_uppercase()).is_some());
        }
        assert!(DialectDescriptor::by_name("postgresql").is_some());
        assert!(DialectDescriptor::by_name("oracle").is_none());
    }

    #[test]
    fn quoting_styles_render() {
        assert_eq!(DialectDescriptor::sqlite().quote("FT1"), "FT1");
        assert_eq!(DialectDescriptor::postgres().quote("FT1"), "\"FT1\"");
        assert_eq!(DialectDescriptor::mysql().quote("FT1"), "`FT1`");
    }
}
