#pragma once

#include <sstream>
#include <string>

#include "mompc/mpc_controller.hpp"
#include "mompc/scenario_library.hpp"
#include "mompc/track.hpp"

namespace mompc::fixture {

inline const Library& demo_library() {
    static const Library lib = load_library(MOMPC_TEST_LIBRARY);
    return lib;
}

inline std::string data_path(const std::string& name) { return std::string(MOMPC_DATA_DIR) + "/" + name; }

inline Track track_from(const std::string& text) {
    std::istringstream in(text);
    return parse_track(in);
}

inline DriveLog drive(const Track& track, const RhoPolicy& policy, const MpcConfig& config = {},
                      const RunOptions& options = {}) {
    return run_drive(track, policy, demo_library(), demo_library().config().model, config, options);
}

}  // namespace mompc::fixture
