// Serves MockBackend over the stdio transport: one {"capability","request"}
// line in, one reply line out. Optional argv[1] is a mock tables JSON file.
// The request "crash" capability exits without replying.
#include <iostream>
#include <string>

#include <json.hpp>

#include "q2/backends/mock.hpp"

int main(int argc, char **argv) {
    using nlohmann::json;
    q2::backends::MockBackend mock(argc > 1 ? q2::backends::MockTables::load(argv[1]) : q2::backends::MockTables{});
    std::string line;
    while (std::getline(std::cin, line)) {
        const auto msg = json::parse(line);
        const auto capability = msg.at("capability").get<std::string>();
        if (capability == "crash")
            return 3;
        if (capability == "garbage") {
            std::cout << "this is not json" << std::endl;
            continue;
        }
        std::cout << mock.call(capability, msg.at("request")).dump() << std::endl;
    }
    return 0;
}
