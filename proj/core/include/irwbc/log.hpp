#pragma once

namespace irwbc::log {

/// Reads IRWBC_LOG (debug|info|warn|error|off) and sets the library log
/// level. Unset means warn.
void configure_from_env();

}  // namespace irwbc::log
