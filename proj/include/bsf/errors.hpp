#pragma once

#include <stdexcept>
#include <string>

namespace bsf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// t_s = 0 makes the compute/send ratio undefined.
class UndefinedRatio : public Error {
 public:
  using Error::Error;
};

/// 2L + t_s = 0: speedup grows without bound, there is no maximizer.
class UnboundedScalability : public Error {
 public:
  using Error::Error;
};

class TransportFailure : public Error {
 public:
  using Error::Error;
};

/// A blocking receive ran past its deadline.
class TransportTimeout : public TransportFailure {
 public:
  using TransportFailure::TransportFailure;
};

class BarrierTimeout : public TransportFailure {
 public:
  using TransportFailure::TransportFailure;
};

/// Raised by synthetic workloads built before the spin kernel was calibrated.
class MustCalibrate : public Error {
 public:
  using Error::Error;
};

/// Where a farm run stopped: the engine phase and the rank that observed it.
struct FarmSite {
  std::string phase;
  int rank = 0;

  std::string describe() const { return "phase '" + phase + "' at rank " + std::to_string(rank); }
};

/// A problem callback raised during a farm run.
class FarmError : public Error {
 public:
  FarmError(FarmSite site, const std::string& what)
      : Error("farm aborted in " + site.describe() + ": " + what), site_(std::move(site)) {}

  const FarmSite& site() const noexcept { return site_; }

 private:
  FarmSite site_;
};

/// The transport failed underneath a farm run.
class FarmTransportError : public TransportFailure {
 public:
  FarmTransportError(FarmSite site, const std::string& what)
      : TransportFailure("farm aborted in " + site.describe() + ": " + what), site_(std::move(site)) {}

  const FarmSite& site() const noexcept { return site_; }

 private:
  FarmSite site_;
};

}  // namespace bsf
