// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. Artifacts go to argv[1] (default: acceptance_out).

#include <filesystem>
#include <iostream>

#include "fracholtz/cli.hpp"

int main(int argc, char** argv) {
    const std::filesystem::path out = argc > 1 ? argv[1] : "acceptance_out";
    fracholtz::RunConfig cfg = fracholtz::default_config();
    cfg.output_dir = out.string();
    try {
        fracholtz::ensure_dir(out);
        auto results = fracholtz::acceptance::run_criteria(cfg, &std::cout);
        fracholtz::acceptance::write_artifacts(out, results);
        results.push_back(fracholtz::acceptance::criterion_12(cfg, out, out / "rerun"));
        std::cout << results.back().line() << "\n";
        fracholtz::acceptance::write_artifacts(out, results);

        std::size_t passed = 0;
        for (const auto& r : results) passed += r.pass() ? 1 : 0;
        std::cout << "\n" << passed << "/" << results.size() << " criteria pass\n";
        for (const auto& r : results)
            for (const auto& m : r.metrics)
                if (!m.pass)
                    std::cout << "  criterion " << r.id << ": " << fracholtz::acceptance::CriterionResult::describe(m)
                              << "\n";
        return passed == results.size() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cout << "acceptance suite aborted: " << e.what() << "\n";
        return 3;
    }
}
