#include "ov/transpile.hpp"

namespace ov {

namespace {

const char* kOwnable = R"(pragma solidity @PRAGMA@;

/**
* @title Ownable
* @dev Set and get owner
*/
contract Ownable {
    // modifier to check if caller is owner
    modifier isOwner() {
        require(msg.sender == owner, "Caller is not owner");
        _;
    }

    // modifier to check if caller is owner
    modifier isCalledBy(address addr) {
        require(msg.sender == addr, "Caller is not the specified address");
        _;
    }

    // @dev Set contract deployer as owner
    constructor() public {
        owner = msg.sender; // 'msg.sender' is sender of current call
    }

    /**
    * @dev Return owner address
    * @return address of owner
    */
    function getOwner() external view returns (address) {
        return owner;
    }

    address private owner;
}
)";

const char* kValidity = R"(pragma solidity @PRAGMA@;

/**
* @title Validity
* @dev define validity of an object
*/
interface Validity {
    /**
    * The invariant condition of an object.
    * Subclass must implement this method speciyfing its invariant.
    */
    function isValid() external view returns (bool);

    // modifier to check object's validity prior a function call
    modifier preValid() {
        require(this.isValid(), "Validity fails pre-check");
        _;
    }

    // modifier to check object's validity immediately after a function call
    modifier postValid() {
        _;
        require(this.isValid(), "Validity fails post-check");
    }
}
)";

const char* kOVValidity = R"(pragma solidity @PRAGMA@;

/**
* @title OVValidity
* @dev define validity of an object
*/
interface OVValidity {
    /**
    * The invariant condition of an object.
    * Subclass must implement this method speciyfing its invariant.
    */
    function isValid() external view returns (bool);

    // modifier to check object's validity prior a function call
    modifier preValid() {
        require(this.isValid(), "Validity fails pre-check");
        _;
    }

    // modifier to  object's validity immediately after a function call
    modifier postValid() {
        _;
        require(this.isValid(), "Validity fails post-check");
    }

    // The following modifiers are short-hand for OV language

    // modifier to check object's validity before and after a function call
    modifier thisThis() {
        require(this.isValid(), "Validity fails pre-check");
        _;
        require(this.isValid(), "Validity fails post-check");
    }

    // modifier to check object's validity after a function call
    modifier botThis() {
        _;
        require(this.isValid(), "Validity fails post-check");
    }

    // modifier to check object's validity before a function call
    modifier thisTop() {
        require(this.isValid(), "Validity fails pre-check");
        _;
    }

    // modifier that is simply not checking object's validity at all
    modifier botTop() {
        _;
    }
}
)";

std::string with_pragma(std::string text, const std::string& pragma) {
  const std::string mark = "@PRAGMA@";
  auto at = text.find(mark);
  if (at != std::string::npos) text.replace(at, mark.size(), pragma);
  return text;
}

}  // namespace

std::vector<SolFile> bundle_api(const EmitterConfig& cfg) {
  return {{"Ownable.sol", with_pragma(kOwnable, cfg.pragma)},
          {"Validity.sol", with_pragma(kValidity, cfg.pragma)},
          {"OVValidity.sol", with_pragma(kOVValidity, cfg.pragma)}};
}

}  // namespace ov
