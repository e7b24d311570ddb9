#![no_main]

use libfuzzer_sys::fuzz_target;

// The distribution token grammar must never panic, and anything it accepts
// must serialize back to a token it accepts again with the same parameters.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(dist) = aoi_core::dist::parse_token(s) {
        if let Some(token) = dist.token() {
            let again = aoi_core::dist::parse_token(&token)
                .expect("canonical token must re-parse");
            assert_eq!(again.token().as_deref(), Some(token.as_str()));
        }
    }
});
