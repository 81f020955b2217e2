#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specnet/cli.hpp"

int main(int argc, char** argv) {
    using namespace specnet;
    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        return run(parse_args(args));
    } catch (const CLI::CallForHelp&) {
        return kExitOk;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const NumericIntegrityError& e) {
        std::fprintf(stderr, "numeric integrity error: %s\n", e.what());
        return kExitNumericIntegrity;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const LengthError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const ConsistencyError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const ValueError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
}
