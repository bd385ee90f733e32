use crate::classify::TaxonomyTable;
use crate::event::ExceptionEvent;

pub const DOC_BASE: &str = "https://docs.python.org/3/library/exceptions.html#";
pub const PYPI_SEARCH: &str = "https://pypi.org/search/?q=";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DocOrigin {
    Builtin,
    ThirdParty(String),
}

/// Documentation link for an exception type.
pub fn gen_doc_url(exception_type: &str, origin: &DocOrigin) -> String {
    match origin {
        DocOrigin::Builtin => format!("{DOC_BASE}{}", exception_type.to_lowercase()),
        DocOrigin::ThirdParty(module) => {
            let q: String = url::form_urlencoded::byte_serialize(module.as_bytes()).collect();
            format!("{PYPI_SEARCH}{q}")
        }
    }
}

/// Built-in when the name ships in the taxonomy table; otherwise the top-level
/// module of a dotted type name, else the package directory of the innermost
/// frame under `site-packages`, else the type name itself.
pub fn origin_for(event: &ExceptionEvent, table: &TaxonomyTable) -> DocOrigin {
    origin_for_name(
        &event.exception_type,
        event.innermost().map(|f| f.file.as_str()),
        table,
    )
}

pub fn origin_for_name(name: &str, innermost_file: Option<&str>, table: &TaxonomyTable) -> DocOrigin {
    if table.is_builtin(name) {
        return DocOrigin::Builtin;
    }
    if let Some((top, _)) = name.split_once('.') {
        return DocOrigin::ThirdParty(top.to_string());
    }
    if let Some(file) = innermost_file {
        let parts: Vec<&str> = file.split(['/', '\\']).collect();
        if let Some(i) = parts.iter().position(|p| *p == "site-packages" || *p == "dist-packages") {
            if let Some(pkg) = parts.get(i + 1).filter(|p| !p.is_empty()) {
                return DocOrigin::ThirdParty(pkg.trim_end_matches(".py").to_string());
            }
        }
    }
    DocOrigin::ThirdParty(name.to_string())
}
