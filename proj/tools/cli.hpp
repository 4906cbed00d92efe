#pragma once

namespace memfem {

/// Entry point of the command-line tool. 0 on success, 1 on a domain error,
/// 2 on a usage or configuration error.
int run_cli(int argc, char** argv);

}  // namespace memfem
