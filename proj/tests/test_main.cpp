#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <spdlog/cfg/helpers.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

int main(int argc, char** argv)
{
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("SARAP_LOG_LEVEL")) {
        spdlog::cfg::helpers::load_levels(level);
    }
    doctest::Context context(argc, argv);
    return context.run();
}
