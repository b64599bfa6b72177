"""Agent pilot: prompt document, action parsing, toolkit and session loop.

Import from the submodules (``codewire.agent.session`` and friends); this
package module stays empty so the completer can use the parsing helpers
without pulling in the session.
"""
