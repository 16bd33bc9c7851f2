#include <iostream>
#include <string>

#include "guardcert/io.hpp"
#include "support/pipeline_fixture.hpp"

// Usage: make_fixture write <dir> | make_fixture validate <report.json>
int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: make_fixture write <dir> | validate <report.json>\n";
        return 1;
    }
    const std::string mode = argv[1];
    try {
        if (mode == "write") {
            std::filesystem::create_directories(argv[2]);
            support::write_pipeline_fixture(argv[2], 20240611);
            return 0;
        }
        if (mode == "validate") {
            const auto errors = guardcert::io::validate_report(guardcert::io::read_json(argv[2]));
            for (const auto& e : errors) {
                std::cerr << e << "\n";
            }
            return errors.empty() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "unknown mode '" << mode << "'\n";
    return 1;
}
