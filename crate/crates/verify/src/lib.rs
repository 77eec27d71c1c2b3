//! Holds the `acceptance` test target. It runs the reference grid and
//! prints one PASS/FAIL line per acceptance criterion.
