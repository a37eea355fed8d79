#![no_main]

libfuzzer_sys::fuzz_target!(|data: &[u8]| sni_sight_fuzz::client_hello(data));
