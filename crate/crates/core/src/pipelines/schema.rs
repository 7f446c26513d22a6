//! Validation against the shipped XSD.
//!
//! Interprets the subset of XML Schema the result schema uses: global and
//! local element declarations, named and anonymous complex types with a
//! single `sequence`, attribute declarations, enumerated string restrictions
//! and the built-in types `string`, `integer`, `nonNegativeInteger`,
//! `positiveInteger` and `double`. Identity constraints are not checked.

use std::collections::HashMap;
use std::sync::LazyLock;

use super::SCHEMA_XSD;

const XS: &str = "http://www.w3.org/2001/XMLSchema";

#[derive(Debug, Clone)]
enum TypeRef {
    Named(String),
    Anonymous(ComplexType),
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: String,
    ty: TypeRef,
    min: usize,
    max: Option<usize>,
}

#[derive(Debug, Clone)]
struct AttrDecl {
    name: String,
    ty: String,
    required: bool,
}

#[derive(Debug, Clone, Default)]
struct ComplexType {
    sequence: Vec<ElementDecl>,
    attributes: Vec<AttrDecl>,
}

#[derive(Debug, Clone)]
struct SimpleType {
    base: String,
    enumeration: Vec<String>,
}

#[derive(Debug, Default)]
struct Schema {
    elements: HashMap<String, ElementDecl>,
    complex: HashMap<String, ComplexType>,
    simple: HashMap<String, SimpleType>,
}

fn xs_children<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &'a str) -> impl Iterator<Item = roxmltree::Node<'a, 'i>> {
    node.children()
        .filter(move |c| c.is_element() && c.tag_name().namespace() == Some(XS) && c.tag_name().name() == name)
}

/// Drops an `xs:` style prefix from a type reference.
fn local(name: &str) -> String {
    name.rsplit(':').next().unwrap_or(name).to_string()
}

fn occurs(v: Option<&str>, default: usize) -> Result<Option<usize>, String> {
    match v {
        None => Ok(Some(default)),
        Some("unbounded") => Ok(None),
        Some(n) => n.parse().map(Some).map_err(|_| format!("bad occurrence `{n}`")),
    }
}

fn parse_element(node: roxmltree::Node) -> Result<ElementDecl, String> {
    let name = node.attribute("name").ok_or("element without name")?.to_string();
    let ty = match node.attribute("type") {
        Some(t) => TypeRef::Named(local(t)),
        None => TypeRef::Anonymous(match xs_children(node, "complexType").next() {
            Some(ct) => parse_complex(ct)?,
            None => return Err(format!("element `{name}` has no type")),
        }),
    };
    Ok(ElementDecl {
        name,
        ty,
        min: occurs(node.attribute("minOccurs"), 1)?.unwrap_or(0),
        max: occurs(node.attribute("maxOccurs"), 1)?,
    })
}

fn parse_complex(node: roxmltree::Node) -> Result<ComplexType, String> {
    let mut ct = ComplexType::default();
    if let Some(seq) = xs_children(node, "sequence").next() {
        for el in xs_children(seq, "element") {
            ct.sequence.push(parse_element(el)?);
        }
    }
    for a in xs_children(node, "attribute") {
        ct.attributes.push(AttrDecl {
            name: a.attribute("name").ok_or("attribute without name")?.to_string(),
            ty: local(a.attribute("type").unwrap_or("string")),
            required: a.attribute("use") == Some("required"),
        });
    }
    Ok(ct)
}

fn parse_schema(xsd: &str) -> Result<Schema, String> {
    let doc = roxmltree::Document::parse(xsd).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    let mut schema = Schema::default();
    for el in xs_children(root, "element") {
        let decl = parse_element(el)?;
        schema.elements.insert(decl.name.clone(), decl);
    }
    for ct in xs_children(root, "complexType") {
        let name = ct.attribute("name").ok_or("unnamed global complexType")?;
        schema.complex.insert(name.to_string(), parse_complex(ct)?);
    }
    for st in xs_children(root, "simpleType") {
        let name = st.attribute("name").ok_or("unnamed global simpleType")?;
        let restriction = xs_children(st, "restriction").next().ok_or("simpleType without restriction")?;
        schema.simple.insert(
            name.to_string(),
            SimpleType {
                base: local(restriction.attribute("base").unwrap_or("string")),
                enumeration: xs_children(restriction, "enumeration")
                    .filter_map(|e| e.attribute("value").map(str::to_string))
                    .collect(),
            },
        );
    }
    Ok(schema)
}

static SCHEMA: LazyLock<Schema> = LazyLock::new(|| parse_schema(SCHEMA_XSD).expect("shipped schema parses"));

fn is_integer(v: &str) -> bool {
    let digits = v.strip_prefix(['+', '-']).unwrap_or(v);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn is_double(v: &str) -> bool {
    matches!(v, "INF" | "-INF" | "+INF" | "NaN")
        || (!v.is_empty()
            && v.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'))
            && v.parse::<f64>().is_ok())
}

impl Schema {
    fn check_value(&self, ty: &str, value: &str) -> Result<(), String> {
        if let Some(st) = self.simple.get(ty) {
            self.check_value(&st.base, value)?;
            if !st.enumeration.is_empty() && !st.enumeration.iter().any(|e| e == value) {
                return Err(format!("`{value}` is not one of {:?}", st.enumeration));
            }
            return Ok(());
        }
        let v = value.trim();
        let ok = match ty {
            "string" => true,
            "integer" => is_integer(v),
            "nonNegativeInteger" => is_integer(v) && !v.starts_with('-') || v == "-0",
            "positiveInteger" => is_integer(v) && !v.starts_with('-') && !v.trim_start_matches(['+', '0']).is_empty(),
            "double" => is_double(v),
            other => return Err(format!("schema uses unsupported type `{other}`")),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("`{value}` is not a valid {ty}"))
        }
    }

    fn validate_element(&self, node: roxmltree::Node, decl: &ElementDecl, path: &str, errors: &mut Vec<String>) {
        let path = format!("{path}/{}", decl.name);
        let complex = match &decl.ty {
            TypeRef::Anonymous(ct) => Some(ct),
            TypeRef::Named(name) => self.complex.get(name),
        };
        let Some(ct) = complex else {
            // Simple content.
            let TypeRef::Named(ty) = &decl.ty else { unreachable!() };
            if node.children().any(|c| c.is_element()) {
                errors.push(format!("{path}: element content in a simple-typed element"));
            }
            if node.attributes().len() > 0 {
                errors.push(format!("{path}: attributes on a simple-typed element"));
            }
            let text: String = node.children().filter_map(|c| c.text()).collect();
            if let Err(e) = self.check_value(ty, &text) {
                errors.push(format!("{path}: {e}"));
            }
            return;
        };

        for a in node.attributes() {
            if a.namespace().is_some() {
                continue;
            }
            match ct.attributes.iter().find(|d| d.name == a.name()) {
                Some(d) => {
                    if let Err(e) = self.check_value(&d.ty, a.value()) {
                        errors.push(format!("{path}/@{}: {e}", a.name()));
                    }
                }
                None => errors.push(format!("{path}: undeclared attribute `{}`", a.name())),
            }
        }
        for d in ct.attributes.iter().filter(|d| d.required) {
            if node.attribute(d.name.as_str()).is_none() {
                errors.push(format!("{path}: missing required attribute `{}`", d.name));
            }
        }
        if node.children().any(|c| c.is_text() && !c.text().unwrap_or("").trim().is_empty()) {
            errors.push(format!("{path}: text in element-only content"));
        }

        let children: Vec<_> = node.children().filter(|c| c.is_element()).collect();
        let mut i = 0;
        for d in &ct.sequence {
            let mut count = 0;
            while i < children.len()
                && children[i].tag_name().name() == d.name
                && d.max.is_none_or(|m| count < m)
            {
                self.validate_element(children[i], d, &path, errors);
                i += 1;
                count += 1;
            }
            if count < d.min {
                errors.push(format!("{path}: expected <{}> (found {count}, need {})", d.name, d.min));
            }
        }
        for extra in &children[i..] {
            errors.push(format!("{path}: unexpected <{}>", extra.tag_name().name()));
        }
    }
}

/// Validates an XML document against the shipped schema, returning every
/// violation found.
pub fn validate_xml(xml: &str) -> Result<(), Vec<String>> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| vec![format!("malformed XML: {e}")])?;
    let root = doc.root_element();
    let mut errors = Vec::new();
    match SCHEMA.elements.get(root.tag_name().name()) {
        Some(decl) if root.tag_name().namespace().is_none() => SCHEMA.validate_element(root, decl, "", &mut errors),
        _ => errors.push(format!("undeclared root element <{}>", root.tag_name().name())),
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_schema_is_understood() {
        let s = &*SCHEMA;
        assert!(s.elements.contains_key("document"));
        assert_eq!(s.complex["ReferenceType"].sequence.len(), 6);
        assert_eq!(s.simple["SourceType"].enumeration.len(), 3);
    }

    #[test]
    fn violations_are_reported() {
        let ok = r#"<document generator="g" version="1" pages="1"><page n="1"><reference detector="text" namer="x" source="text-only"><raw>r</raw><authors/></reference></page></document>"#;
        validate_xml(ok).unwrap();
        let cases = [
            (ok.replace("pages=\"1\"", "pages=\"-1\""), "nonNegativeInteger"),
            (ok.replace("n=\"1\"", "n=\"0\""), "positiveInteger"),
            (ok.replace("source=\"text-only\"", "source=\"green\""), "not one of"),
            (ok.replace("<raw>r</raw>", ""), "expected <raw>"),
            (ok.replace("<authors/>", "<authors/><year>19x9</year>"), "integer"),
            (ok.replace("<authors/>", "<title/><authors/>"), "unexpected <authors>"),
            (ok.replace(" namer=\"x\"", ""), "missing required attribute `namer`"),
            (ok.replace("<page ", "<page bogus=\"1\" "), "undeclared attribute"),
            (ok.replace("</page>", "</page>stray"), "text in element-only"),
        ];
        for (xml, needle) in cases {
            let errs = validate_xml(&xml).unwrap_err();
            assert!(errs.iter().any(|e| e.contains(needle)), "{needle}: {errs:?}");
        }
        assert!(validate_xml("<other/>").is_err());
    }
}
