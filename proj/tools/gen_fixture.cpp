// Regenerates the bundled fixture dataset. The committed files under
// data/ come from this generator with its default seed; tests compare
// against a fresh run to catch accidental edits.

#include <cstdio>
#include <string>

#include "overlay/fixture.hpp"

int main(int argc, char** argv) {
    std::string dir = "data";
    unsigned seed = overlay::fixture::kDefaultSeed;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out" && i + 1 < argc) dir = argv[++i];
        else if (arg == "--seed" && i + 1 < argc) seed = static_cast<unsigned>(std::stoul(argv[++i]));
        else {
            std::fprintf(stderr, "usage: gen_fixture [--out DIR] [--seed N]\n");
            return 1;
        }
    }
    overlay::fixture::write_all(dir, seed);
    std::printf("wrote fixture_returns.csv, fixture_config.json, spreads.csv to %s (seed %u)\n",
                dir.c_str(), seed);
    return 0;
}
