"""MCP server exposing the dataset commands as tools.

Tools are discovered from the tools directory: every module there registers
its function with ``@mcp.tool()`` when imported.
"""

import importlib.util
import logging
import sys
from pathlib import Path
from typing import Any

from dotenv import load_dotenv
from fastmcp import FastMCP

# Global FastMCP instance for tools to import
mcp: FastMCP = FastMCP(name="gaussdigits")

TOOLS_DIR = Path(__file__).parent.parent / "tools"


def load_local_env() -> bool:
    """Load environment variables from a .env file if it exists."""
    if load_dotenv(override=False):
        logging.info("Loaded environment variables from .env file")
        return True
    return False


class DatasetMCPServer:
    """MCP server serving generate / verify / preview / masks as tools."""

    def __init__(self, name: str = "gaussdigits", tools_dir: str | Path = TOOLS_DIR):
        """Initialize the server.

        Args:
            name: Server name
            tools_dir: Directory containing tool files
        """
        global mcp
        self.name = name
        self.tools_dir = Path(tools_dir)
        load_local_env()

        # Tools imported from here on register on this instance
        mcp = FastMCP(name=self.name)
        self.mcp = mcp
        self.loaded_tools: list[str] = []

    def load_tools(self) -> None:
        """Discover and load all tools from the tools directory.

        Exits the process if any tool module fails to load.
        """
        if not self.tools_dir.exists():
            logging.warning(f"Tools directory {self.tools_dir} does not exist")
            return

        tool_files = sorted(f for f in self.tools_dir.glob("*.py") if f.name != "__init__.py")
        if not tool_files:
            logging.warning(f"No tool files found in {self.tools_dir}")
            return

        has_errors = False
        for tool_file in tool_files:
            tool_name = tool_file.stem
            tools_before = len(self.mcp._tool_manager._tools)
            if not self._import_tool_module(tool_file, tool_name):
                logging.error(f"Failed to load tool module: {tool_name}")
                has_errors = True
            elif len(self.mcp._tool_manager._tools) == tools_before:
                logging.error(f"Tool file {tool_name} did not register any tools")
                has_errors = True
            else:
                self.loaded_tools.append(tool_name)
                logging.info(f"Loaded tool module: {tool_name}")

        # Fail fast rather than serve a partial tool set
        if has_errors:
            logging.error("Some tools failed to load. Exiting.")
            sys.exit(1)

        logging.info(f"Loaded {len(self.loaded_tools)} dataset tools")

    def _import_tool_module(self, tool_file: Path, tool_name: str) -> bool:
        try:
            spec = importlib.util.spec_from_file_location(f"tools.{tool_name}", tool_file)
            if spec is None or spec.loader is None:
                return False
            module = importlib.util.module_from_spec(spec)
            sys.modules[f"tools.{tool_name}"] = module
            # Executing the module triggers its @mcp.tool() decorator
            spec.loader.exec_module(module)
            return True
        except Exception as e:
            logging.error(f"Error importing {tool_file}: {e}")
            return False

    def get_tools_sync(self) -> dict[str, Any]:
        """Get tools synchronously for testing purposes."""
        return self.mcp._tool_manager._tools

    def run(self, transport_mode: str = "stdio", host: str = "localhost", port: int = 3000) -> None:
        """Run the FastMCP server.

        Args:
            transport_mode: "stdio" or "http"
            host: Host to bind to in HTTP mode
            port: Port to bind to in HTTP mode
        """
        logging.info(f"Starting gaussdigits server in {transport_mode} mode")
        if transport_mode == "http":
            self.mcp.run(transport="http", host=host, port=port, path="/mcp")
        elif transport_mode == "stdio":
            self.mcp.run()
        else:
            raise ValueError(f"Invalid transport mode: {transport_mode}")
