"""After-action review service: missions, frames, markers, and the chat loop."""
