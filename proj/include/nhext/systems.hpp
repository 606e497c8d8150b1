#pragma once

// Built-in example systems and the system-file loader.

#include "nhext/geometry.hpp"

namespace nhext {

struct BadParams : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// name in {"disk", "carriage", "particle"}; overrides merge into the defaults
// (disk: M,R; carriage: m,m0,J,J2,c,R,l; particle: alpha). Returned specs are
// validated and frame-orthogonal (g_ai = 0).
SystemSpec builtin(const std::string& name,
                   const std::map<std::string, double>& overrides = {});

// small random-but-analytic systems for property testing: frame = id + eps*trig,
// metric = id + small symmetric trig, all emitted through the DSL parser
SystemSpec random_system(int n, int m, unsigned seed);

SystemSpec load_system(const std::string& path);
void save_system(const SystemSpec& spec, const std::string& path);

// JSON-string (de)serialization used by load/save and the tests
std::string system_to_json(const SystemSpec& spec);
SystemSpec system_from_json(const std::string& text);

}  // namespace nhext
