"""SCI PnP package entry point."""

from sci_pnp.cli import main

if __name__ == "__main__":
    main()
