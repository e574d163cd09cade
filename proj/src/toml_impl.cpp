// The one translation unit that compiles the TOML parser.
#define TOML_IMPLEMENTATION
#include "toml_support.hpp"
