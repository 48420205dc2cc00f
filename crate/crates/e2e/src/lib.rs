//! Holds the `acceptance` test target, which checks the whole pipeline
//! against its quality criteria. There is no library code here.
