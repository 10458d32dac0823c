#include <cstdio>
#include <string>
#include <vector>

#include "matxfer/commands.hpp"
#include "matxfer/errors.hpp"

namespace {

const char* kUsage =
    "usage: matxfer <command> [--config FILE] [--section.key VALUE]...\n"
    "\n"
    "commands:\n"
    "  pretrain         train a network from scratch on procedural materials\n"
    "  finetune         adapt a checkpoint to a directory of exemplar maps\n"
    "  infer            predict stitched maps for a large input image\n"
    "  render           render a map set under a directional light\n"
    "  preview-augment  dump synthesized training pairs for inspection\n"
    "  metrics          RMSE report between two map sets\n"
    "\n"
    "exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure\n";

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        std::fputs(kUsage, args.empty() ? stderr : stdout);
        return args.empty() ? 2 : 0;
    }

    const std::string command = args[0];
    std::string config_path;
    std::vector<std::string> flags;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) {
                std::fprintf(stderr, "error: config: --config: missing value\n");
                return 2;
            }
            config_path = args[++i];
        } else {
            flags.push_back(args[i]);
        }
    }

    try {
        matxfer::RunConfig cfg = matxfer::parse_config(config_path, flags);
        matxfer::execute(command, cfg);
        return 0;
    } catch (const matxfer::ConfigError& e) {
        std::fprintf(stderr, "error: config: %s\n", e.what());
        return 2;
    } catch (const matxfer::DataError& e) {
        std::fprintf(stderr, "error: data: %s\n", e.what());
        return 3;
    } catch (const matxfer::NumericError& e) {
        std::fprintf(stderr, "error: numeric: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
