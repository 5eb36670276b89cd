//! DDL rendering for a synthesized warehouse.

use crate::dialect::DialectDescriptor;
use crate::rng::StringReferential;
use crate::schema::WarehouseSchema;
use thiserror::Error;

/// Whether `CREATE TABLE` statements declare keys.
///
/// `Declared` emits `PRIMARY KEY` and `FOREIGN KEY` table constraints;
/// `Omitted` leaves them out for engines where constraint checking makes
/// bulk loads crawl. Column definitions (including `NOT NULL`) are the same
/// either way, and the generators maintain referential integrity
/// themselves, so omission changes nothing but the engine's bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    Declared,
    Omitted,
}

/// DDL rendering failures.
#[derive(Debug, Error)]
pub enum DdlError {
    #[error("dialect {dialect} has no {kind} type mapping")]
    MissingTypeMapping { dialect: String, kind: &'static str },
}

/// Renders one `CREATE TABLE` statement per warehouse table.
///
/// Statement order satisfies foreign key dependencies when executed
/// sequentially: each dimension's levels coarsest first, dimensions in
/// order, fact tables last. Key and link columns use the dialect's integer
/// type, measures its real type, and members a fixed-width character type
/// sized to the values the generator produces (attribute name, underscore,
/// pool entry).
pub fn emit_ddl(
    schema: &WarehouseSchema,
    dialect: &DialectDescriptor,
    constraints: ConstraintMode,
) -> Result<Vec<String>, DdlError> {
    let int_type = dialect
        .integer_type
        .as_deref()
        .ok_or_else(|| DdlError::MissingTypeMapping {
            dialect: dialect.name.clone(),
            kind: "integer",
        })?;
    let real_type = dialect
        .real_type
        .as_deref()
        .ok_or_else(|| DdlError::MissingTypeMapping {
            dialect: dialect.name.clone(),
            kind: "real",
        })?;
    let char_type = dialect
        .char_type
        .as_deref()
        .ok_or_else(|| DdlError::MissingTypeMapping {
            dialect: dialect.name.clone(),
            kind: "character",
        })?;

    let mut statements = Vec::with_capacity(schema.table_count());

    for dim in &schema.dimensions {
        for level in dim.levels.iter().rev() {
            let mut cols = Vec::new();
            cols.push(format!(
                "{} {int_type} NOT NULL",
                dialect.quote(&level.primary_key)
            ));
            for member in &level.members {
                cols.push(format!(
                    "{} {char_type}({}) NOT NULL",
                    dialect.quote(member),
                    StringReferential::value_width(member.len())
                ));
            }
            if let Some(fk) = &level.foreign_key {
                cols.push(format!("{} {int_type} NOT NULL", dialect.quote(fk)));
            }
            if constraints == ConstraintMode::Declared {
                cols.push(format!(
                    "PRIMARY KEY ({})",
                    dialect.quote(&level.primary_key)
                ));
                if let Some(fk) = &level.foreign_key {
                    let coarser = dim.level(level.level + 1);
                    cols.push(format!(
                        "FOREIGN KEY ({}) REFERENCES {} ({})",
                        dialect.quote(fk),
                        dialect.quote(&coarser.table_name),
                        dialect.quote(&coarser.primary_key)
                    ));
                }
            }
            statements.push(format!(
                "CREATE TABLE {} ({})",
                dialect.quote(&level.table_name),
                cols.join(", ")
            ));
        }
    }

    for fact in &schema.fact_tables {
        let mut cols = Vec::new();
        for key in &fact.key_attrs {
            cols.push(format!("{} {int_type} NOT NULL", dialect.quote(key)));
        }
        for measure in &fact.measures {
            cols.push(format!("{} {real_type} NOT NULL", dialect.quote(measure)));
        }
        if constraints == ConstraintMode::Declared {
            let keys: Vec<String> = fact.key_attrs.iter().map(|k| dialect.quote(k)).collect();
            cols.push(format!("PRIMARY KEY ({})", keys.join(", ")));
            for (slot, key) in fact.key_attrs.iter().enumerate() {
                let finest = schema.dimensions[fact.dim_refs[slot]].finest();
                cols.push(format!(
                    "FOREIGN KEY ({}) REFERENCES {} ({})",
                    dialect.quote(key),
                    dialect.quote(&finest.table_name),
                    dialect.quote(&finest.primary_key)
                ));
            }
        }
        statements.push(format!(
            "CREATE TABLE {} ({})",
            dialect.quote(&fact.table_name),
            cols.join(", ")
        ));
    }

    Ok(statements)
}
