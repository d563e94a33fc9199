// Writes the example task files into the given directory.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "morphkit/tasks.hpp"

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    using namespace morphkit;
    const fs::path dir = argc > 1 ? argv[1] : "tasks";
    fs::create_directories(dir);
    auto save = [&](const std::string& file, const TaskFile& t) {
        std::ofstream(dir / file) << task_json(t).dump(2) << '\n';
        std::cout << (dir / file).string() << '\n';
    };
    save("sinusoid_20x10.json", sinusoid_task(20, 10, 0.5));
    save("sinusoid_10x5.json", sinusoid_task(10, 5, 0.5));
    save("sinusoid_external_10x5.json", sinusoid_task(10, 5, 0.5, 0.02, MicroscaleMethod::external_designs));
    save("checkerboard_beam.json", checkerboard_task());
    save("octopus.json", octopus_task());
    save("rest_4x2.json", rest_task(4, 2));
    return 0;
}
